"""Cross-checks of the field/occupation-time identities on a dual chain.

Two identities are verified, exactly where closed forms exist and
statistically otherwise.  The bridge identity compares the twisted
expectation of ``z_x z̄_y F(z z̄)`` with the twisted-and-bridge expectation
of ``F(l + z z̄)``; the occupation identity is its diagonal form for the
squared-field law, where the left side is the size-biased expectation
``E[rho_x F(rho)]``.  Monte Carlo rows share the Gaussian draws between the
two sides (common random numbers) and score the paired difference, with
imaginary parts of real quantities folded into the same z-score.

All thresholds: exact rows at an absolute tolerance (default 1e-10), MC
rows at 4 standard errors; wide enough that a suite of dozens of rows has
negligible family-wise false-alarm probability.
"""

from __future__ import annotations

import itertools
import math
import time
from math import pi, sin

import numpy as np

from .chain import DualPair, build_dual, energy_quadratic, energy_report, nchain, trace_chain
from .functionals import BumpField, ExpField, MonomialField, ProductField
from .paths import bridge_values
from .reporting import (
    VerificationReport,
    exact_report,
    info_report,
    mc_report,
    score as _score,
    weighted_ratio as _ratio,
)
from .seeding import rng_stream
from .twisted import (
    build_twisted,
    cm_grid,
    complete_monotonicity_check,
    green,
    mgf,
    partition,
    q_moment,
    q_moment_oracle,
    resolvent_trace_residual,
    sample_twisted_batch,
)

__all__ = [
    "example_suite",
    "iso_suite",
    "mass_gap_suite",
    "mgf_suite",
    "positivity_suite",
    "q_suite",
    "trace_suite",
    "verify_bridge_identity",
    "verify_occupation_identity",
    "verify_positivity",
    "verify_trace",
]

Z_MAX = 4.0


def _mc_compare(name, lhs_num, rhs_num, den, z_max=Z_MAX):
    """Paired MC comparison of two weighted-ratio estimates."""
    rl, sel_re, sel_im = _ratio(lhs_num, den)
    rr, ser_re, ser_im = _ratio(rhs_num, den)
    rd, sed_re, _ = _ratio(lhs_num - rhs_num, den)
    z = max(
        _score(rd.real, sed_re),
        _score(rl.imag, sel_im),
        _score(rr.imag, ser_im),
    )
    return mc_report(name, rl.real, sel_re, rr.real, ser_re, z_max=z_max, z=z)


def _mc_vs_exact(name, num, den, target, z_max=Z_MAX):
    """One weighted-ratio estimate bracketed against an exact value."""
    r, se_re, se_im = _ratio(num, den)
    z = max(_score(r.real - target, se_re), _score(r.imag, se_im))
    return mc_report(name, r.real, se_re, float(target), 0.0, z_max=z_max, z=z)


def _resolve_functional(dp: DualPair, functional, chi):
    """Return (functional, chi-vector-or-None); chi not None means exponential."""
    if functional is None:
        chiv = np.zeros(dp.n) if chi is None else np.asarray(chi, dtype=float)
        return ExpField(chiv, dp.m), chiv
    if chi is not None:
        raise ValueError("pass either a functional or chi, not both")
    if isinstance(functional, ExpField):
        return functional, functional.chi
    return functional, None


def verify_bridge_identity(
    dp: DualPair,
    x: int,
    y: int,
    functional=None,
    chi=None,
    count: int = 100_000,
    seed: int = 0,
    mode: str = "auto",
    z_max: float = Z_MAX,
    tol: float = 1e-10,
    name: str | None = None,
) -> VerificationReport:
    """Twisted field correlation against the bridge-shifted functional.

    Exact mode (constant or exponential F): both sides reduce to
    ``G_chi(x, y) * Phi(chi)``, computed along the two determinant routes.
    MC mode: weighted-sample estimates of both sides with shared field
    draws and an independent path stream per side pairing.
    """
    t0 = time.perf_counter()
    func, chiv = _resolve_functional(dp, functional, chi)
    if mode == "auto":
        mode = "exact" if chiv is not None else "mc"
    label = name or f"bridge_identity[x={x},y={y}]"
    if mode == "exact":
        if chiv is None:
            raise ValueError("exact mode needs a constant or exponential functional")
        lhs = green(dp, chiv)[x, y] * (partition(dp, chiv) / partition(dp))
        rhs = green(dp, chiv)[x, y] * mgf(dp, chiv)
        rep = exact_report(label, lhs, rhs, tol=tol)
    else:
        tm = build_twisted(dp)
        z, w = sample_twisted_batch(tm, count, seed)
        rho = np.abs(z) ** 2
        lhs_num = w * z[:, x] * np.conj(z[:, y]) * func(rho)
        bvals = bridge_values(dp, x, y, func, count, seed, offsets=rho)
        rhs_num = w * bvals
        rep = _mc_compare(label, lhs_num, rhs_num, w, z_max=z_max)
    return rep.with_seconds(time.perf_counter() - t0)


def verify_occupation_identity(
    dp: DualPair,
    x: int,
    functional=None,
    chi=None,
    count: int = 100_000,
    seed: int = 0,
    mode: str = "auto",
    z_max: float = Z_MAX,
    tol: float = 1e-10,
    name: str | None = None,
) -> VerificationReport:
    """Size-biased squared-field expectation against the diagonal bridge.

    Exact mode: both sides equal ``G_chi(x, x) * Phi(chi)``; at chi = 0 each
    side is the diagonal Green value.  MC mode as in the bridge identity
    with the left integrand ``rho_x F(rho)``.
    """
    t0 = time.perf_counter()
    func, chiv = _resolve_functional(dp, functional, chi)
    if mode == "auto":
        mode = "exact" if chiv is not None else "mc"
    label = name or f"occupation_identity[x={x}]"
    if mode == "exact":
        if chiv is None:
            raise ValueError("exact mode needs a constant or exponential functional")
        lhs = green(dp, chiv)[x, x] * (partition(dp, chiv) / partition(dp))
        rhs = green(dp, chiv)[x, x] * mgf(dp, chiv)
        rep = exact_report(label, lhs, rhs, tol=tol)
    else:
        tm = build_twisted(dp)
        z, w = sample_twisted_batch(tm, count, seed)
        rho = np.abs(z) ** 2
        lhs_num = w * rho[:, x] * func(rho)
        bvals = bridge_values(dp, x, x, func, count, seed, offsets=rho)
        rhs_num = w * bvals
        rep = _mc_compare(label, lhs_num, rhs_num, w, z_max=z_max)
    return rep.with_seconds(time.perf_counter() - t0)


def positivity_suite(dp: DualPair, count: int = 100_000, seed: int = 0, z_max: float = Z_MAX):
    """Nonnegativity battery for the squared-field law.

    Weighted-sample expectations of nonnegative functionals must be real
    and nonnegative at 4 SE; exponential and monomial rows also bracket
    their exact determinant/permanent values; a quick sign-pattern sweep of
    the Laplace transform must be clean.
    """
    rows = []
    tm = build_twisted(dp)
    z, w = sample_twisted_batch(tm, count, seed)
    rho = np.abs(z) ** 2
    rng = rng_stream(seed, "positivity-battery")
    n = dp.n

    rows.append(_mc_vs_exact("positivity_constant", w.copy(), w, 1.0, z_max))
    for t in range(2):
        chi = rng.uniform(0.0, 1.5, n)
        f = ExpField(chi, dp.m)
        rows.append(_mc_vs_exact(f"positivity_exp{t}_vs_mgf", w * f(rho), w, mgf(dp, chi), z_max))

    bump = BumpField(rng.uniform(0.0, 1.0, n), width=0.75)
    est, se_re, se_im = _ratio(w * bump(rho), w)
    z_neg = max(_score(min(est.real, 0.0), se_re), _score(est.imag, se_im))
    rows.append(mc_report("positivity_bump_nonneg", est.real, se_re, 0.0, 0.0, z_max=z_max, z=z_neg))

    pts_single = [int(rng.integers(n))]
    pts_pair = sorted(rng.choice(n, size=2, replace=True).tolist())
    for pts, tag in ((pts_single, "single"), (pts_pair, "pair")):
        f = MonomialField(np.bincount(pts, minlength=n))
        rows.append(
            _mc_vs_exact(f"positivity_moment_{tag}_vs_permanent", w * f(rho), w, q_moment(dp, pts), z_max)
        )

    cm = complete_monotonicity_check(dp, grid=cm_grid(n, 2, 1.0), max_order=3, powers=(2,))
    rows.append(exact_report("positivity_cm_clean", len(cm.violations), 0.0, tol=0.5))
    return rows


def verify_positivity(dp: DualPair, count: int = 100_000, seed: int = 0, z_max: float = Z_MAX) -> VerificationReport:
    """Summary row over the positivity battery: number of failing rows vs 0."""
    t0 = time.perf_counter()
    rows = positivity_suite(dp, count=count, seed=seed, z_max=z_max)
    fails = sum(1 for r in rows if not r.passed)
    z = max((r.z for r in rows if math.isfinite(r.z)), default=0.0)
    return VerificationReport(
        name="verify_positivity",
        mode="mc",
        lhs=float(fails),
        rhs=0.0,
        se_lhs=0.0,
        se_rhs=0.0,
        z=z,
        passed=fails == 0,
        seconds=time.perf_counter() - t0,
    )


def verify_trace(dp: DualPair, keep, points=None, tol: float = 1e-10) -> VerificationReport:
    """Moment-level consistency between a chain and its trace on ``keep``.

    The traced potential must equal the restricted potential, and every
    point-moment computed on the full chain must match the one computed on
    the trace, both to ``tol``.
    """
    t0 = time.perf_counter()
    keep_sorted = sorted({int(k) for k in keep})
    traced = trace_chain(dp, keep_sorted)
    pos = {s: i for i, s in enumerate(keep_sorted)}
    sub = np.ix_(keep_sorted, keep_sorted)
    resid = float(np.abs(traced.V - dp.V[sub]).max())
    pts = [int(p) for p in (points if points is not None else keep_sorted)]
    if any(p not in pos for p in pts):
        raise ValueError("points must lie inside keep")
    for size in (1, 2, 3):
        for tup in itertools.combinations_with_replacement(pts, size):
            full = q_moment(dp, list(tup))
            part = q_moment(traced, [pos[p] for p in tup])
            resid = max(resid, abs(full - part))
    label = f"trace_consistency[|Y|={len(keep_sorted)}]"
    rep = exact_report(label, resid, 0.0, tol=tol)
    return rep.with_seconds(time.perf_counter() - t0)


def trace_suite(dp: DualPair, seed: int = 0, tol: float = 1e-10, subsets: int = 3):
    """Traces onto random proper subsets, plus the full-set identity row."""
    rng = rng_stream(seed, "trace-suite")
    rows = [verify_trace(dp, range(dp.n), tol=tol, points=range(min(dp.n, 3)))]
    for _ in range(subsets):
        size = int(rng.integers(1, dp.n)) if dp.n > 1 else 1
        keep = sorted(rng.choice(dp.n, size=size, replace=False).tolist())
        rows.append(verify_trace(dp, keep, tol=tol))
    return rows


def mass_gap_suite(dp: DualPair, seed: int = 0, draws: int = 1000):
    """Gap value plus the energy lower bound on random complex vectors."""
    t0 = time.perf_counter()
    rep = energy_report(dp)
    rng = rng_stream(seed, "mass-gap")
    z = rng.standard_normal((draws, dp.n)) + 1j * rng.standard_normal((draws, dp.n))
    energies = energy_quadratic(dp, z)
    norms = np.einsum("ki,ki,i->k", z, np.conj(z), dp.m).real
    margin = float((energies - rep.mass_gap * norms).min())
    rows = [
        info_report("mass_gap", rep.mass_gap, rep.mass_gap).with_seconds(time.perf_counter() - t0),
        exact_report("energy_lower_bound_margin", min(margin, 0.0), 0.0, tol=1e-10),
    ]
    return rows, rep.mass_gap


def mgf_suite(dp: DualPair, seed: int = 0, tol: float = 1e-10):
    """Laplace-transform consistency rows: ratio identity, trace derivative."""
    rng = rng_stream(seed, "mgf-suite")
    rows = [exact_report("mgf_at_zero", mgf(dp, np.zeros(dp.n)), 1.0, tol=1e-12)]
    base = partition(dp)
    worst = 0.0
    for _ in range(5):
        s = rng.uniform(0.0, 2.0, dp.n)
        worst = max(worst, abs(mgf(dp, s) - partition(dp, s) / base) / max(mgf(dp, s), 1e-300))
    rows.append(exact_report("mgf_equals_partition_ratio", worst, 0.0, tol=1e-12))
    s = rng.uniform(0.0, 1.0, dp.n)
    worst_tr = max(resolvent_trace_residual(dp, s, u) for u in range(dp.n))
    rows.append(exact_report("logdet_derivative_vs_trace", worst_tr, 0.0, tol=1e-8))
    g0 = green(dp)
    bumped = green(dp, np.full(dp.n, 0.3))
    rows.append(
        exact_report("green_monotone_in_chi", float(min((g0 - bumped).min(), 0.0)), 0.0, tol=1e-12)
    )
    return rows


def iso_suite(dp: DualPair, count: int = 100_000, seed: int = 0, tol: float = 1e-10, z_max: float = Z_MAX):
    """Identity battery on a chain: exact rows, MC brackets, cross-MC rows."""
    rng = rng_stream(seed, "iso-suite")
    n = dp.n
    x = int(rng.integers(n))
    y = int(rng.integers(n))
    chi = rng.uniform(0.0, 1.0, n)
    rows = [
        verify_bridge_identity(dp, x, y, tol=tol, name=f"bridge_f1_exact[{x},{y}]"),
        verify_bridge_identity(dp, x, y, chi=chi, tol=tol, name=f"bridge_exp_exact[{x},{y}]"),
        verify_bridge_identity(
            dp, x, y, functional=ExpField(chi, dp.m), count=count, seed=seed,
            mode="mc", z_max=z_max, name=f"bridge_exp_mc[{x},{y}]",
        ),
        verify_bridge_identity(
            dp, x, y, functional=ProductField(), count=count, seed=seed,
            mode="mc", z_max=z_max, name=f"bridge_product_mc[{x},{y}]",
        ),
        verify_occupation_identity(dp, x, tol=tol, name=f"occupation_f1_exact[{x}]"),
        verify_occupation_identity(dp, x, chi=chi, tol=tol, name=f"occupation_exp_exact[{x}]"),
        verify_occupation_identity(
            dp, x, functional=ProductField(), count=count, seed=seed,
            mode="mc", z_max=z_max, name=f"occupation_product_mc[{x}]",
        ),
    ]
    # the twisted field correlation itself must bracket the Green density
    tm = build_twisted(dp)
    z, w = sample_twisted_batch(tm, count, seed)
    rows.append(
        _mc_vs_exact(f"field_correlation_vs_green[{x},{y}]", w * z[:, x] * np.conj(z[:, y]), w, green(dp)[x, y], z_max)
    )
    return rows


def q_suite(dp: DualPair, count: int = 100_000, seed: int = 0, tol: float = 1e-10, z_max: float = Z_MAX):
    """Squared-field law battery: positivity, monotonicity, moment oracle."""
    rows = positivity_suite(dp, count=count, seed=seed, z_max=z_max)
    cm = complete_monotonicity_check(dp, max_order=4, powers=(2, 3))
    rows.append(exact_report("cm_full_sweep_clean", len(cm.violations), 0.0, tol=0.5))
    rng = rng_stream(seed, "q-suite-points")
    for k in (1, 2, 3):
        pts = sorted(rng.choice(dp.n, size=k, replace=True).tolist())
        val = q_moment(dp, pts)
        oracle = q_moment_oracle(dp, pts)
        rows.append(
            exact_report(f"q_moment_vs_derivative_oracle_k{k}", val, oracle, tol=1e-6, relative=True)
        )
    return rows


def example_suite(n_states: int, count: int = 100_000, seed: int = 1, z_max: float = Z_MAX):
    """Full battery on the unit-rate march chain of ``n_states`` states.

    Exact rows: Laplace-transform factorisation into prod (1 + s_i)^{-1}
    and the exponential-occupation identities.  MC rows: squared-field
    marginal moments k!, size-biased moments (k+1)!, and the unit-mean
    exponential law of the bridge local time.  The spectral gap row is
    informational: the eigensolver value is logged against the closed form
    2 sin^2(pi / 2n) without being asserted.
    """
    dp = build_dual(nchain(n_states))
    n = dp.n
    x = n // 2
    rng = rng_stream(seed, "example-suite")
    rows = []

    worst = 0.0
    for _ in range(3):
        s = rng.uniform(0.0, 2.0, n)
        target = float(np.prod(1.0 / (1.0 + s)))
        worst = max(worst, abs(mgf(dp, s) - target) / target)
    rows.append(exact_report(f"example_n{n}_mgf_factorisation", worst, 0.0, tol=1e-12))

    tm = build_twisted(dp)
    z, w = sample_twisted_batch(tm, count, seed)
    rho = np.abs(z) ** 2
    for k in (1, 2, 3):
        rows.append(
            _mc_vs_exact(f"example_n{n}_moment_k{k}", w * rho[:, x] ** k, w, float(math.factorial(k)), z_max)
        )
    for j in (1, 2, 3):
        rows.append(
            mc_report(
                f"example_n{n}_size_biased_m{j}",
                *_size_biased(w, rho[:, x], j),
                float(math.factorial(j + 1)),
                0.0,
                z_max=z_max,
            )
        )

    for j in (1, 2, 3):
        f = MonomialField(np.bincount([x] * j, minlength=n))
        vals = bridge_values(dp, x, x, f, count, seed)
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(count))
        z_loc = _score(mean - math.factorial(j), se)
        rows.append(
            mc_report(f"example_n{n}_bridge_local_time_m{j}", mean, se, float(math.factorial(j)), 0.0, z_max=z_max, z=z_loc)
        )

    gap = energy_report(dp).mass_gap
    rows.append(info_report(f"example_n{n}_mass_gap_vs_closed_form", gap, 2.0 * sin(pi / (2 * n)) ** 2))

    rows.append(verify_occupation_identity(dp, x, name=f"example_n{n}_occupation_f1_exact"))
    chi = rng.uniform(0.2, 1.0, n)
    rows.append(verify_occupation_identity(dp, x, chi=chi, name=f"example_n{n}_occupation_exp_exact"))
    rows.append(
        verify_occupation_identity(
            dp, x, functional=ExpField(chi, dp.m), count=count, seed=seed,
            mode="mc", z_max=z_max, name=f"example_n{n}_occupation_exp_mc",
        )
    )
    return rows


def _size_biased(w, rho_x, j):
    """Estimate E[rho^{j+1}] / E[rho] with its delta-method SE."""
    r, se_re, se_im = _ratio(w * rho_x ** (j + 1), w * rho_x)
    return r.real, max(se_re, se_im)
