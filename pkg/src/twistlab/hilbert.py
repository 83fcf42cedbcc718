"""Truncated-operator laboratory: renormalised determinants and Gaussian
characteristic identities, with drift-on-the-circle and Levy-symbol models.

Everything infinite-dimensional is verified on finite truncations only;
convergence in the truncation size stands in for statements about the
limit.  Operators are kept real by working in the trigonometric basis of
the periodic Sobolev space; complex exponentials appear only in the drift
coefficients supplied as input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import NumericalError
from .reporting import (
    VerificationReport,
    exact_report,
    info_report,
    mc_report,
    score as _score,
    weighted_ratio as _ratio,
)
from .seeding import rng_stream

__all__ = [
    "CircleDriftModel",
    "EtaKernelReport",
    "LevyModel",
    "SeriesReport",
    "TruncatedOperator",
    "circle_B_matrix",
    "circle_model",
    "circle_suite",
    "det2",
    "det2_suite",
    "det_multiplicativity",
    "eta_kernel",
    "gaussian_char_identities",
    "hs_partial_sum",
    "levy_hs_check",
    "levy_suite",
    "random_skew",
    "random_symmetric_nonneg",
]

KIND_TOL = 1e-12
Z_MAX = 4.0


def _readonly(a, dtype=None):
    out = np.array(a) if dtype is None else np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TruncatedOperator:
    """Finite matrix standing in for a Hilbert-space operator.

    ``kind`` is one of symmetric-nonneg, skew, general; symmetry or
    skewness is checked at construction to 1e-12 (relative).
    """

    mat: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        mat = _readonly(self.mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("operator matrix must be square")
        scale = max(1.0, float(np.abs(mat).max()))
        if self.kind == "skew":
            if float(np.abs(mat + mat.T).max()) > KIND_TOL * scale:
                raise ValueError("matrix is not skew-symmetric")
        elif self.kind == "symmetric-nonneg":
            if float(np.abs(mat - mat.T).max()) > KIND_TOL * scale:
                raise ValueError("matrix is not symmetric")
            low = float(np.linalg.eigvalsh((mat + mat.T) / 2.0)[0])
            if low < -KIND_TOL * scale:
                raise ValueError(f"matrix has negative eigenvalue {low:.3e}")
        elif self.kind != "general":
            raise ValueError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


def _matrix(op, expected_kind=None) -> np.ndarray:
    if isinstance(op, TruncatedOperator):
        if expected_kind is not None and op.kind != expected_kind:
            raise ValueError(f"expected a {expected_kind} operator, got {op.kind}")
        return op.mat
    return TruncatedOperator(np.asarray(op, dtype=float), expected_kind or "general").mat


def random_skew(dim: int, rng: np.random.Generator, scale: float = 1.0) -> TruncatedOperator:
    a = rng.standard_normal((dim, dim)) * scale
    return TruncatedOperator((a - a.T) / 2.0, "skew")


def random_symmetric_nonneg(dim: int, rng: np.random.Generator, scale: float = 1.0) -> TruncatedOperator:
    a = rng.standard_normal((dim, dim)) * scale
    return TruncatedOperator(a @ a.T / dim, "symmetric-nonneg")


def det2(T) -> float:
    """Renormalised determinant det((I + T) e^{-T}) from the eigenvalues.

    Equals det(I + T) e^{-tr T} in finite dimension; an eigenvalue at -1
    gives 0 (reported, not an error).  For real input the eigenvalues pair
    into conjugates and the product is returned as a real number.
    """
    mat = np.asarray(T.mat if isinstance(T, TruncatedOperator) else T)
    lam = np.linalg.eigvals(mat)
    scale = max(1.0, float(np.abs(lam).max()))
    if np.any(np.abs(1.0 + lam) < 1e-14 * scale):
        return 0.0
    prod = complex(np.prod((1.0 + lam) * np.exp(-lam)))
    if abs(prod.imag) > 1e-10 * max(1.0, abs(prod)):
        raise NumericalError("conjugate eigenvalue pairing failed for a real operator")
    return float(prod.real)


def det_multiplicativity(T1, T2, tol: float = 1e-10) -> VerificationReport:
    """det(I + T1 + T2 + T1 T2) against det(I + T1) det(I + T2)."""
    a = np.asarray(T1.mat if isinstance(T1, TruncatedOperator) else T1, dtype=float)
    b = np.asarray(T2.mat if isinstance(T2, TruncatedOperator) else T2, dtype=float)
    eye = np.eye(a.shape[0])
    lhs = np.linalg.det(eye + a + b + a @ b)
    rhs = np.linalg.det(eye + a) * np.linalg.det(eye + b)
    return exact_report("det_multiplicativity", lhs, rhs, tol=tol, relative=True)


def gaussian_char_identities(C, B, f1, f2, count: int = 100_000, seed: int = 0, z_max: float = Z_MAX):
    """Monte Carlo checks of the Gaussian characteristic-functional identities.

    With phi1, phi2 independent standard Gaussian vectors and
    psi = phi1 + i phi2: (a) E e^{i <B phi1, phi2>} = det2(I + B)^{-1};
    (b) E e^{-(1/2) <(C - B) psi, psī>} = det2(I + C + B)^{-1} e^{-tr C};
    (c) the psi(f1) psī(f2)-weighted ratio equals
    2 <(I + C + B)^{-1} f1, f2> (the factor 2 is forced by the
    normalisation E psi(f) psī(f) = 2 |f|^2 of standard normals, and is
    pinned by the block-Gaussian oracle in the tests); (d, e) the
    Wick-compensated variants of (b) and (c).
    """
    cm = _matrix(C, "symmetric-nonneg")
    bm = _matrix(B, "skew")
    d = cm.shape[0]
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    if bm.shape != (d, d) or f1.shape != (d,) or f2.shape != (d,):
        raise ValueError("dimension mismatch between C, B, f1, f2")
    rng = rng_stream(seed, "gaussian-identities")
    phi1 = rng.standard_normal((count, d))
    phi2 = rng.standard_normal((count, d))
    pairing = np.einsum("ij,ij->i", phi2, phi1 @ bm.T)
    quad1 = np.einsum("ij,ij->i", phi1, phi1 @ cm.T)
    quad2 = np.einsum("ij,ij->i", phi2, phi2 @ cm.T)
    tr_c = float(np.trace(cm))
    eye = np.eye(d)
    # -(1/2) <(C - B) psi, psī> expands to -(1/2)(<C phi1, phi1> + <C phi2, phi2>)
    # minus i <B phi1, phi2>; the pairing sign matters only for (c) and (e)

    def mean_vs(name, samples, target):
        r, se_re, se_im = _ratio(samples, np.ones(count))
        z = max(_score(r.real - target, se_re), _score(r.imag, se_im))
        return mc_report(name, r.real, se_re, target, 0.0, z_max=z_max, z=z)

    def ratio_vs(name, num, den, target):
        r, se_re, se_im = _ratio(num, den)
        z = max(_score(r.real - target, se_re), _score(r.imag, se_im))
        return mc_report(name, r.real, se_re, target, 0.0, z_max=z_max, z=z)

    weight = np.exp(-0.5 * (quad1 + quad2) - 1j * pairing)
    psi_f1 = phi1 @ f1 + 1j * (phi2 @ f1)
    psi_bar_f2 = phi1 @ f2 - 1j * (phi2 @ f2)
    resolvent = 2.0 * float(f2 @ np.linalg.solve(eye + cm + bm, f1))

    rows = [
        mean_vs("char_skew_vs_det2", np.exp(1j * pairing), 1.0 / det2(bm)),
        mean_vs("char_complex_vs_det2", weight, math.exp(-tr_c) / det2(cm + bm)),
        ratio_vs("pairing_vs_resolvent", psi_f1 * psi_bar_f2 * weight, weight, resolvent),
        mean_vs("char_wick_vs_det2", weight * math.exp(tr_c), 1.0 / det2(cm + bm)),
        ratio_vs(
            "pairing_wick_vs_resolvent",
            psi_f1 * psi_bar_f2 * weight * math.exp(tr_c),
            weight * math.exp(tr_c),
            resolvent,
        ),
    ]
    return rows


@dataclass(frozen=True)
class CircleDriftModel:
    """Periodic diffusion with drift: spectral shift and drift coefficients.

    ``ks``/``coeffs`` hold the finitely many Fourier coefficients of the
    real drift (conjugate-closed: coeff(-k) = conj(coeff(k))).
    """

    epsilon: float
    ks: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        ks = _readonly(self.ks, dtype=int)
        coeffs = _readonly(np.asarray(self.coeffs, dtype=complex))
        if ks.ndim != 1 or coeffs.shape != ks.shape:
            raise ValueError("ks and coeffs must be matching vectors")
        if len(set(ks.tolist())) != ks.size:
            raise ValueError("duplicate frequencies in drift coefficients")
        table = dict(zip(ks.tolist(), coeffs.tolist()))
        for k, c in table.items():
            mirror = table.get(-k)
            if mirror is None or abs(mirror - np.conj(c)) > 1e-12 * max(1.0, abs(c)):
                raise ValueError(f"drift is not real: coefficient at {-k} must conjugate the one at {k}")
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def bandwidth(self) -> int:
        return int(np.abs(self.ks).max()) if self.ks.size else 0

    def coeff(self, k: int) -> complex:
        hits = np.flatnonzero(self.ks == k)
        return complex(self.coeffs[hits[0]]) if hits.size else 0.0j

    def drift(self, theta) -> np.ndarray:
        """Evaluate the (real) drift function on the circle."""
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta, dtype=complex)
        for k, c in zip(self.ks, self.coeffs):
            out = out + c * np.exp(1j * k * theta)
        return out.real


def circle_model(epsilon: float, pos_coeffs: dict) -> CircleDriftModel:
    """Build a drift model from coefficients at frequencies k >= 0.

    Negative frequencies are filled in by conjugation; the k = 0
    coefficient must be real.
    """
    ks: list[int] = []
    cs: list[complex] = []
    for k, c in sorted(pos_coeffs.items()):
        if k < 0:
            raise ValueError("give only k >= 0; negatives are implied")
        c = complex(c)
        if k == 0:
            if abs(c.imag) > 1e-12 * max(1.0, abs(c)):
                raise ValueError("coefficient at 0 must be real")
            ks.append(0)
            cs.append(complex(c.real))
        else:
            ks.extend([k, -k])
            cs.extend([c, np.conj(c)])
    return CircleDriftModel(epsilon=float(epsilon), ks=np.array(ks, int), coeffs=np.array(cs, complex))


@dataclass(frozen=True)
class SeriesReport:
    """Partial sums of a nonnegative series on a ladder of truncations.

    The convergence verdict compares dyadic block sums
    S(p) - S(p/2) against S(p/2) - S(p/4) for the largest power of two
    p <= top: decaying blocks (ratio below 0.9) certify convergence,
    non-decaying blocks flag divergence.  Truncations below 8 terms only
    certify identically-zero tails.
    """

    ladder: tuple
    partial_sums: tuple
    increments: tuple
    converged: bool


def _series_report(partial, top: int) -> SeriesReport:
    top = int(top)
    p = 4
    while p * 2 <= top:
        p *= 2
    ladder = sorted({max(1, p // 4), max(1, p // 2), min(p, top), top})
    sums = [float(partial(k)) for k in ladder]
    incrs = [b - a for a, b in zip(sums, sums[1:])]
    if top >= 8:
        s_quarter = float(partial(p // 4))
        s_half = float(partial(p // 2))
        s_full = float(partial(p))
        block1 = s_half - s_quarter
        block2 = s_full - s_half
        if block1 > 1e-15:
            converged = block2 <= 0.9 * block1 + 1e-15
        else:
            converged = block2 <= 1e-12
    else:
        converged = (not incrs) or incrs[-1] <= 1e-12
    return SeriesReport(
        ladder=tuple(ladder),
        partial_sums=tuple(sums),
        increments=tuple(incrs),
        converged=converged,
    )


def hs_partial_sum(model: CircleDriftModel, K: int) -> float:
    """Square-sum of the drift coupling over basis frequencies up to K.

    sum over |k|, |l| <= K of (k^2 / (k^2 + eps)) |bhat(l - k)|^2 / (l^2 + eps).
    Nondecreasing in K; its convergence is the square-summability condition
    on the skew part.
    """
    eps = model.epsilon
    k = np.arange(-K, K + 1)
    front = k.astype(float) ** 2 / (k.astype(float) ** 2 + eps)
    total = 0.0
    for d, c in zip(model.ks, model.coeffs):
        l = k + int(d)
        ok = np.abs(l) <= K
        total += float(
            np.sum(front[ok] * (abs(c) ** 2) / (l[ok].astype(float) ** 2 + eps))
        )
    return total


def circle_B_matrix(model: CircleDriftModel, K: int):
    """Skew coupling operator on the truncated periodic Sobolev basis.

    Returns the matrix of (-A)^{-1} S in the orthonormal basis of
    H = {f : integral (f'^2 + eps f^2) < inf}, where A is the shifted
    Laplacian and S the antisymmetrised drift term, together with a
    `SeriesReport` of the square-sum partial sums.  The matrix is real
    and skew-symmetric (asserted to 1e-10); basis order is
    [constant, cos 1, sin 1, .., cos K, sin K].
    """
    if K < model.bandwidth:
        raise ValueError(f"truncation K={K} smaller than drift bandwidth {model.bandwidth}")
    eps = model.epsilon
    size = 2 * K + 1
    freq = np.arange(-K, K + 1)
    s_c = np.zeros((size, size), dtype=complex)
    for d, c in zip(model.ks, model.coeffs):
        for li, l in enumerate(freq):
            k = l + int(d)
            if abs(k) > K:
                continue
            s_c[k + K, li] = 0.5j * (k + l) * c
    norm = np.sqrt(freq.astype(float) ** 2 + eps)
    s_c = s_c / norm[:, None] / norm[None, :]

    # unitary change to the real basis [const, cos_j, sin_j, ...]
    w = np.zeros((size, size), dtype=complex)
    w[K, 0] = 1.0
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for j in range(1, K + 1):
        w[K + j, 2 * j - 1] = inv_sqrt2
        w[K - j, 2 * j - 1] = inv_sqrt2
        w[K + j, 2 * j] = -1j * inv_sqrt2
        w[K - j, 2 * j] = 1j * inv_sqrt2
    b_real = np.conj(w.T) @ s_c @ w
    scale = max(1.0, float(np.abs(b_real).max()))
    if float(np.abs(b_real.imag).max()) > 1e-12 * scale:
        raise NumericalError("real-basis drift operator has a residual imaginary part")
    mat = b_real.real
    if float(np.abs(mat + mat.T).max()) > 1e-10 * scale:
        raise NumericalError("drift operator is not skew in the Sobolev inner product")
    mat = (mat - mat.T) / 2.0
    report = _series_report(lambda kk: hs_partial_sum(model, kk), K)
    return TruncatedOperator(mat, "skew"), report


def levy_hs_check(model: "LevyModel") -> SeriesReport:
    """Partial sums of sum_k (b_k / a_k)^2 with a divergence flag."""
    terms = (model.b / model.a) ** 2
    n = terms.size
    cums = np.concatenate([[0.0], np.cumsum(terms)])
    return _series_report(lambda k: cums[min(int(k), n)], n)


@dataclass(frozen=True)
class LevyModel:
    """Symbol coefficients a_k + i b_k for k = 1..K (a even, b odd)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _readonly(self.a, dtype=float)
        b = _readonly(self.b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise ValueError("a and b must be matching nonempty vectors")
        if np.any(a <= 0):
            raise ValueError("all a_k must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def _eta_vector(model: CircleDriftModel, K: int, x: float) -> np.ndarray:
    """Coordinates of the evaluation element at x in the real basis."""
    eps = model.epsilon
    out = np.empty(2 * K + 1)
    out[0] = 1.0 / math.sqrt(eps)
    ks = np.arange(1, K + 1)
    scale = np.sqrt(2.0 / (ks.astype(float) ** 2 + eps))
    out[1::2] = np.cos(ks * x) * scale
    out[2::2] = np.sin(ks * x) * scale
    return out


@dataclass(frozen=True)
class EtaKernelReport:
    kernel_value: float
    v_chi_value: float
    kernel_coarse: float
    v_chi_coarse: float


def eta_kernel(model: CircleDriftModel, K: int, x: float, y: float, chi_points=(), chi_weights=()) -> EtaKernelReport:
    """Reproducing kernel K(x, y) and damped kernel V_chi(x, y) at truncation K.

    chi is the finitely supported measure sum p_j delta_{u_j}; the damping
    operator is the rank-sum of the evaluation elements at the u_j.  Values
    at truncation K//2 are reported alongside as a convergence indicator.
    """
    chi_points = list(chi_points)
    chi_weights = [float(p) for p in chi_weights]
    if len(chi_points) != len(chi_weights):
        raise ValueError("chi_points and chi_weights must have equal length")
    if any(p < 0 for p in chi_weights):
        raise ValueError("chi weights must be nonnegative")

    def at(kk: int):
        eta_x = _eta_vector(model, kk, x)
        eta_y = _eta_vector(model, kk, y)
        kernel = float(eta_x @ eta_y)
        op, _ = circle_B_matrix(model, kk)
        m = np.eye(2 * kk + 1) - op.mat
        for u, p in zip(chi_points, chi_weights):
            eta_u = _eta_vector(model, kk, u)
            m = m + p * np.outer(eta_u, eta_u)
        v = float(eta_y @ np.linalg.solve(m, eta_x))
        return kernel, v

    kernel, v = at(K)
    coarse_k = max(model.bandwidth, K // 2) if model.bandwidth else max(1, K // 2)
    kernel_c, v_c = at(coarse_k)
    return EtaKernelReport(kernel_value=kernel, v_chi_value=v, kernel_coarse=kernel_c, v_chi_coarse=v_c)


def det2_suite(dim: int = 6, count: int = 100_000, seed: int = 0, tol: float = 1e-10, z_max: float = Z_MAX):
    """Determinant calculus and Gaussian identity battery at one dimension."""
    rng = rng_stream(seed, "det2-suite")
    t_gen = rng.standard_normal((dim, dim)) / math.sqrt(dim)
    rows = [
        exact_report(
            "det2_vs_det_exp_trace",
            det2(t_gen) * math.exp(float(np.trace(t_gen))),
            float(np.linalg.det(np.eye(dim) + t_gen)),
            tol=tol,
            relative=True,
        )
    ]
    t2 = rng.standard_normal((dim, dim)) / math.sqrt(dim)
    rep_mult = det_multiplicativity(t_gen, t2, tol=tol)
    rows.append(rep_mult)

    b_op = random_skew(dim, rng)
    bbt = b_op.mat @ b_op.mat.T
    rows.append(
        exact_report(
            "det2_skew_vs_sqrt_gram",
            det2(b_op),
            math.sqrt(float(np.linalg.det(np.eye(dim) + bbt))),
            tol=tol,
            relative=True,
        )
    )
    rows.append(exact_report("det2_skew_sign_flip", det2(b_op), det2(-b_op.mat), tol=1e-12, relative=True))
    rows.append(
        exact_report("det2_skew_at_least_one", min(det2(b_op) - 1.0, 0.0), 0.0, tol=1e-12)
    )

    c_op = random_symmetric_nonneg(dim, rng)
    smallest = float(np.linalg.svd(np.eye(dim) + c_op.mat + b_op.mat, compute_uv=False)[-1])
    rows.append(exact_report("identity_plus_cb_invertible", min(smallest, 1e-6), 1e-6, tol=1e-12))

    f1 = rng.standard_normal(dim)
    f2 = rng.standard_normal(dim)
    rows.extend(gaussian_char_identities(c_op, b_op, f1, f2, count=count, seed=seed, z_max=z_max))
    return rows


def circle_suite(model: CircleDriftModel, K: int = 128, tol: float = 1e-10):
    """Drift-coupling battery: skewness, square-sum convergence, kernels."""
    op, report = circle_B_matrix(model, K)
    skew_resid = float(np.abs(op.mat + op.mat.T).max())
    rows = [
        exact_report("circle_skew_residual", skew_resid, 0.0, tol=tol),
        exact_report("circle_hs_converged", 1.0 if report.converged else 0.0, 1.0, tol=0.5),
        info_report("circle_hs_partial_sum", report.partial_sums[-1], report.partial_sums[-1]),
    ]
    eta = eta_kernel(model, K, 0.7, 1.9)
    rows.append(
        exact_report(
            "circle_kernel_symmetry",
            eta.kernel_value,
            eta_kernel(model, K, 1.9, 0.7).kernel_value,
            tol=1e-12,
            relative=True,
        )
    )
    u = 0.7
    base = eta_kernel(model, K, u, u)
    damped = eta_kernel(model, K, u, u, chi_points=[u], chi_weights=[0.5])
    rows.append(
        exact_report(
            "circle_damping_decreases_kernel",
            min(base.v_chi_value - damped.v_chi_value, 0.0),
            0.0,
            tol=1e-12,
        )
    )
    return rows


def levy_suite(model: LevyModel):
    """Square-summability check of the symbol ratio sequence."""
    report = levy_hs_check(model)
    return [
        exact_report("levy_series_converged", 1.0 if report.converged else 0.0, 1.0, tol=0.5),
        info_report("levy_partial_sum", report.partial_sums[-1], report.partial_sums[-1]),
    ]
