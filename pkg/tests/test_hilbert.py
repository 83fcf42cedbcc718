import numpy as np
import pytest

from twistlab.hilbert import (
    LevyModel,
    TruncatedOperator,
    circle_B_matrix,
    circle_model,
    circle_suite,
    det2,
    det2_suite,
    det_multiplicativity,
    eta_kernel,
    gaussian_char_identities,
    hs_partial_sum,
    levy_hs_check,
    levy_suite,
    random_skew,
    random_symmetric_nonneg,
)
from twistlab.reporting import count_failures
from twistlab.seeding import rng_stream


def test_kind_validation():
    with pytest.raises(ValueError):
        TruncatedOperator(np.array([[0.0, 1.0], [1.0, 0.0]]), "skew")
    with pytest.raises(ValueError):
        TruncatedOperator(np.array([[1.0, 0.3], [0.0, 1.0]]), "symmetric-nonneg")
    with pytest.raises(ValueError):
        TruncatedOperator(-np.eye(2), "symmetric-nonneg")
    op = TruncatedOperator(np.array([[0.0, 1.0], [-1.0, 0.0]]), "skew")
    assert op.dim == 2


def test_det2_zero_operator():
    assert det2(np.zeros((4, 4))) == pytest.approx(1.0, abs=1e-14)


def test_det2_eigenvalue_minus_one_gives_zero():
    assert det2(np.diag([-1.0, 0.5])) == 0.0


def test_det2_matches_det_times_exp_trace():
    rng = rng_stream(61, "hilbert-tests")
    t = rng.standard_normal((5, 5)) / np.sqrt(5)
    lhs = det2(t) * np.exp(np.trace(t))
    rhs = np.linalg.det(np.eye(5) + t)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_det2_skew_identities():
    rng = rng_stream(62, "hilbert-tests")
    b = random_skew(4, rng)
    gram = np.linalg.det(np.eye(4) + b.mat @ b.mat.T)
    assert det2(b) == pytest.approx(np.sqrt(gram), rel=1e-10)
    assert det2(b) == pytest.approx(det2(-b.mat), rel=1e-12)
    assert det2(b) >= 1.0 - 1e-12
    assert det2(np.zeros((4, 4))) == pytest.approx(1.0, abs=1e-14)
    # closed form in dimension 2
    beta = 0.7
    b2 = np.array([[0.0, beta], [-beta, 0.0]])
    assert det2(b2) == pytest.approx(1.0 + beta**2, rel=1e-12)


def test_det_multiplicativity_rows():
    rng = rng_stream(63, "hilbert-tests")
    t1 = rng.standard_normal((6, 6)) / 3.0
    assert det_multiplicativity(t1, np.zeros((6, 6))).passed
    t2 = rng.standard_normal((6, 6)) / 3.0
    assert det_multiplicativity(t1, t2).passed
    d = np.diag(rng.uniform(0.1, 1.0, 6))
    rep = det_multiplicativity(d, d)
    assert rep.passed
    assert rep.lhs == pytest.approx(float(np.prod((1 + np.diag(d)) ** 2)), rel=1e-12)


def test_identity_plus_cb_invertible():
    rng = rng_stream(64, "hilbert-tests")
    c = random_symmetric_nonneg(6, rng)
    b = random_skew(6, rng)
    smallest = np.linalg.svd(np.eye(6) + c.mat + b.mat, compute_uv=False)[-1]
    assert smallest > 0.1


def pairing_ratio_block_oracle(c, b, f1, f2):
    """Dense block-Gaussian value of the weighted pairing ratio.

    Tilting standard normals phi1, phi2 by exp(-(1/2) quad - i pairing)
    gives E[u u^T] = Q^{-1} with the complex-symmetric block matrix below;
    assembling psi(f1) psī(f2) from the blocks is independent of the
    perturbation-determinant route being verified.
    """
    d = c.shape[0]
    eye = np.eye(d)
    q = np.block([[eye + c, 1j * b.T], [1j * b, eye + c]])
    cov = np.linalg.inv(q)
    cxx, cxy = cov[:d, :d], cov[:d, d:]
    cyx, cyy = cov[d:, :d], cov[d:, d:]
    return complex(
        f1 @ cxx @ f2 + f1 @ cyy @ f2 + 1j * (f1 @ cyx @ f2 - f1 @ cxy @ f2)
    )


def test_gaussian_identities_trivial_case():
    rows = gaussian_char_identities(
        np.zeros((3, 3)), np.zeros((3, 3)), np.ones(3), np.ones(3), count=2000, seed=1
    )
    for r in rows:
        assert r.passed
    targets = {r.name: r.rhs for r in rows}
    assert targets["char_skew_vs_det2"] == pytest.approx(1.0)
    assert targets["char_complex_vs_det2"] == pytest.approx(1.0)
    assert targets["pairing_vs_resolvent"] == pytest.approx(2.0 * 3.0)


def test_gaussian_identities_two_dim_closed_form():
    beta = 0.8
    b = np.array([[0.0, beta], [-beta, 0.0]])
    rows = gaussian_char_identities(
        np.zeros((2, 2)), b, np.array([1.0, 0.0]), np.array([0.0, 1.0]), count=100_000, seed=2
    )
    skew_row = next(r for r in rows if r.name == "char_skew_vs_det2")
    assert skew_row.rhs == pytest.approx(1.0 / (1.0 + beta**2), rel=1e-12)
    assert skew_row.passed


def test_gaussian_identities_random_and_block_oracle():
    rng = rng_stream(65, "hilbert-tests")
    c = random_symmetric_nonneg(6, rng)
    b = random_skew(6, rng)
    f1 = rng.standard_normal(6)
    f2 = rng.standard_normal(6)
    # the resolvent target itself, pinned by the block-Gaussian oracle
    oracle = pairing_ratio_block_oracle(c.mat, b.mat, f1, f2)
    target = 2.0 * float(f2 @ np.linalg.solve(np.eye(6) + c.mat + b.mat, f1))
    assert abs(oracle.imag) < 1e-12
    assert oracle.real == pytest.approx(target, rel=1e-12)
    rows = gaussian_char_identities(c, b, f1, f2, count=100_000, seed=3)
    assert count_failures(rows) == 0


def test_gaussian_identities_reject_wrong_kinds():
    rng = rng_stream(66, "hilbert-tests")
    sym = random_symmetric_nonneg(3, rng)
    with pytest.raises(ValueError):
        gaussian_char_identities(sym, sym, np.ones(3), np.ones(3), count=10)


def test_det2_suite_clean():
    rows = det2_suite(6, count=100_000, seed=7)
    assert count_failures(rows) == 0


def test_circle_zero_drift():
    model = circle_model(1.0, {})
    op, report = circle_B_matrix(model, 16)
    assert np.abs(op.mat).max() == 0.0
    assert report.partial_sums[-1] == 0.0
    assert report.converged


def test_circle_cos_drift_partial_sums():
    model = circle_model(1.0, {1: 0.5})
    # direct-summation oracle at the two truncations
    def direct(K):
        total = 0.0
        for k in range(-K, K + 1):
            for l in (k - 1, k + 1):
                if abs(l) <= K:
                    total += (k * k / (k * k + 1.0)) * 0.25 / (l * l + 1.0)
        return total

    s64, s128 = hs_partial_sum(model, 64), hs_partial_sum(model, 128)
    assert s64 == pytest.approx(direct(64), rel=1e-12)
    assert s128 == pytest.approx(direct(128), rel=1e-12)
    # frozen from the oracle: the 64 -> 128 difference is 7.81e-3
    assert s128 - s64 == pytest.approx(7.810831e-3, rel=1e-5)
    assert s128 - s64 < 1e-2
    # per-truncation tail increments in that range are all below 1e-3
    steps = np.diff([hs_partial_sum(model, k) for k in range(64, 129)])
    assert steps.max() < 1e-3
    assert np.all(steps >= 0)
    _, report = circle_B_matrix(model, 128)
    assert report.converged


def test_circle_matrix_skew_for_random_band_limited_drift():
    rng = rng_stream(67, "hilbert-tests")
    coeffs = {0: rng.standard_normal() * 0.2}
    for k in (1, 2, 3):
        coeffs[k] = complex(rng.standard_normal(), rng.standard_normal()) * 0.3
    model = circle_model(0.7, coeffs)
    op, _ = circle_B_matrix(model, 32)
    assert np.abs(op.mat + op.mat.T).max() <= 1e-10
    with pytest.raises(ValueError):
        circle_B_matrix(model, 2)  # below the drift bandwidth


def test_circle_matrix_against_drift_quadrature():
    # entries <(-A)^{-1} S u_l, u_k>_H equal (1/2) integral b (u_l' u_k - u_l u_k')
    # over the circle; check a few against trapezoid quadrature
    model = circle_model(1.0, {1: 0.5})  # drift cos(theta)
    K = 4
    op, _ = circle_B_matrix(model, K)
    theta = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
    b_theta = np.cos(theta)

    def basis(idx):
        if idx == 0:
            return np.ones_like(theta) / np.sqrt(model.epsilon), np.zeros_like(theta)
        j = (idx + 1) // 2
        scale = np.sqrt(2.0 / (j * j + model.epsilon))
        if idx % 2 == 1:
            return np.cos(j * theta) * scale, -j * np.sin(j * theta) * scale
        return np.sin(j * theta) * scale, j * np.cos(j * theta) * scale

    for k_idx, l_idx in ((0, 1), (1, 2), (2, 3), (3, 6), (1, 4)):
        uk, duk = basis(k_idx)
        ul, dul = basis(l_idx)
        integrand = 0.5 * b_theta * (dul * uk - ul * duk)
        quad = integrand.mean()
        assert op.mat[k_idx, l_idx] == pytest.approx(quad, abs=1e-10)


def test_hs_partial_sums_nondecreasing():
    model = circle_model(0.5, {1: 0.3, 2: 0.1})
    sums = [hs_partial_sum(model, k) for k in (4, 8, 16, 32, 64)]
    assert all(b >= a for a, b in zip(sums, sums[1:]))


def test_levy_convergent_and_divergent():
    k = np.arange(1.0, 201.0)
    good = levy_hs_check(LevyModel(a=k**2, b=k))
    assert good.converged
    # frozen from the series oracle: sum_{101..200} 1/k^2 = 4.963e-3 < 1e-2
    tail = float(np.sum(1.0 / k[100:] ** 2))
    assert tail == pytest.approx(4.9629e-3, rel=1e-4)
    assert good.partial_sums[-1] == pytest.approx(float(np.sum(1.0 / k**2)), rel=1e-12)
    bad = levy_hs_check(LevyModel(a=k, b=k))
    assert not bad.converged
    zero = levy_hs_check(LevyModel(a=k, b=0.0 * k))
    assert zero.converged and zero.partial_sums[-1] == 0.0
    with pytest.raises(ValueError):
        LevyModel(a=np.array([1.0, 0.0]), b=np.array([1.0, 1.0]))


def test_eta_kernel_series_and_symmetry():
    model = circle_model(1.0, {})
    K = 40
    rep = eta_kernel(model, K, 0.3, 0.3)
    series = 1.0 / model.epsilon + sum(2.0 / (k * k + model.epsilon) for k in range(1, K + 1))
    assert rep.kernel_value == pytest.approx(series, rel=1e-12)
    assert rep.v_chi_value == pytest.approx(series, rel=1e-12)  # no drift, no damping
    a = eta_kernel(model, K, 0.3, 1.4)
    b = eta_kernel(model, K, 1.4, 0.3)
    assert a.kernel_value == pytest.approx(b.kernel_value, rel=1e-12)


def test_eta_kernel_damping_monotone():
    model = circle_model(1.0, {1: 0.5})
    u = 1.1
    base = eta_kernel(model, 48, u, u)
    light = eta_kernel(model, 48, u, u, chi_points=[u], chi_weights=[0.3])
    heavy = eta_kernel(model, 48, u, u, chi_points=[u], chi_weights=[1.0])
    assert heavy.v_chi_value < light.v_chi_value < base.v_chi_value


def test_damped_kernel_matches_gaussian_pairing_on_truncation():
    # finite shadow of the continuum identity: the field built on the
    # truncated basis has <Z_x Z̄_y>_weighted equal (up to the pairing
    # factor 2) to the damped kernel V_chi(x, y)
    from twistlab.hilbert import _eta_vector

    model = circle_model(1.0, {1: 0.4, 2: 0.1})
    K = 8
    x, y = 0.9, 2.3
    chi_points, chi_weights = [0.5, 4.0], [0.6, 0.3]
    op, _ = circle_B_matrix(model, K)
    c = np.zeros_like(op.mat)
    for u, p in zip(chi_points, chi_weights):
        eta_u = _eta_vector(model, K, u)
        c += p * np.outer(eta_u, eta_u)
    eta_x = _eta_vector(model, K, x)
    eta_y = _eta_vector(model, K, y)
    rows = gaussian_char_identities(
        TruncatedOperator(c, "symmetric-nonneg"), op, eta_y, eta_x, count=200_000, seed=11
    )
    pairing = next(r for r in rows if r.name == "pairing_vs_resolvent")
    target = eta_kernel(model, K, x, y, chi_points=chi_points, chi_weights=chi_weights)
    assert pairing.rhs == pytest.approx(2.0 * target.v_chi_value, rel=1e-10)
    assert pairing.passed


def test_circle_and_levy_suites():
    assert count_failures(circle_suite(circle_model(1.0, {1: 0.5}), K=128)) == 0
    k = np.arange(1.0, 201.0)
    assert count_failures(levy_suite(LevyModel(a=k**2, b=k))) == 0
    bad = levy_suite(LevyModel(a=k, b=k))
    assert count_failures(bad) == 1  # divergence is flagged
