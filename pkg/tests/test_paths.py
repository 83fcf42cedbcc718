import numpy as np
import pytest

from twistlab.chain import ChainSpec, build_dual, nchain, random_chain
from twistlab.functionals import ExpField, MonomialField, ProductField
from twistlab.paths import (
    bridge_estimate,
    bridge_values,
    occupation,
    occupation_batch,
    sample_path,
)
from twistlab.seeding import rng_stream
from twistlab.twisted import green


def test_no_jump_chain_single_visit():
    spec = ChainSpec(q=np.ones(2), pi=np.zeros((2, 2)), mu=np.array([0.5, 0.5]))
    dp = build_dual(spec)
    path = sample_path(dp, 0, seed=3)
    assert path.killed
    assert path.states.tolist() == [0]
    assert path.durations.size == 1 and path.durations[0] > 0


def test_march_chain_visits_in_order():
    dp = build_dual(nchain(5))
    for seed in range(5):
        path = sample_path(dp, 0, seed=seed)
        assert path.states.tolist() == [0, 1, 2, 3, 4]
        assert np.all(path.durations > 0)


def test_path_follows_support():
    rng = rng_stream(41, "path-tests")
    dp = build_dual(random_chain(5, rng))
    path = sample_path(dp, 2, seed=9)
    for a, b in zip(path.states, path.states[1:]):
        assert dp.pi[a, b] > 0


def test_sample_path_deterministic():
    dp = build_dual(nchain(4))
    p1 = sample_path(dp, 0, seed=42)
    p2 = sample_path(dp, 0, seed=42)
    assert np.array_equal(p1.durations, p2.durations)


def test_occupation_conservation():
    rng = rng_stream(42, "path-tests")
    dp = build_dual(random_chain(5, rng))
    path = sample_path(dp, 0, seed=7)
    occ = occupation(dp, path)
    assert np.all(occ.l >= 0)
    assert np.sum(occ.l * dp.m) == pytest.approx(occ.lifetime, rel=1e-12)
    unit = build_dual(nchain(1))
    single = occupation(unit, sample_path(unit, 0, seed=1))
    assert single.l[0] == pytest.approx(single.lifetime, rel=1e-14)


def test_occupation_batch_mean_matches_green():
    rng = rng_stream(43, "path-tests")
    dp = build_dual(random_chain(4, rng))
    g = green(dp)
    fields, lives = occupation_batch(dp, 0, 100_000, seed=11)
    assert np.allclose(np.sum(fields * dp.m, axis=1), lives, rtol=1e-10)
    for y in range(4):
        se = fields[:, y].std(ddof=1) / np.sqrt(fields.shape[0])
        assert abs(fields[:, y].mean() - g[0, y]) <= 4.0 * se
    # mean lifetime is the m-weighted row sum of the Green density
    se_life = lives.std(ddof=1) / np.sqrt(lives.size)
    assert abs(lives.mean() - np.sum(g[0] * dp.m)) <= 4.0 * se_life


def test_bridge_total_mass_is_green():
    rng = rng_stream(44, "path-tests")
    dp = build_dual(random_chain(4, rng))
    g = green(dp)
    one = ExpField(np.zeros(4), dp.m)
    est, se = bridge_estimate(dp, 1, 3, one, 100_000, seed=12)
    assert abs(est - g[1, 3]) <= 4.0 * se


def test_bridge_exponential_matches_damped_green():
    rng = rng_stream(45, "path-tests")
    dp = build_dual(random_chain(4, rng))
    chi = rng.uniform(0.2, 1.2, 4)
    est, se = bridge_estimate(dp, 0, 2, ExpField(chi, dp.m), 100_000, seed=13)
    assert abs(est - green(dp, chi)[0, 2]) <= 4.0 * se


def test_bridge_quadrature_agrees_with_closed_form():
    # same functional through the generic quadrature path and the closed form
    rng = rng_stream(46, "path-tests")
    dp = build_dual(random_chain(4, rng))
    chi = rng.uniform(0.2, 1.0, 4)
    exp_f = ExpField(chi, dp.m)

    class OpaqueExp:
        def __call__(self, field):
            return exp_f(field)

    closed = bridge_values(dp, 0, 2, exp_f, 2000, seed=14)
    quad = bridge_values(dp, 0, 2, OpaqueExp(), 2000, seed=14)
    assert np.abs(closed - quad).max() <= 1e-7 * max(1.0, np.abs(closed).max())


def test_bridge_unreachable_target_is_exact_zero():
    dp = build_dual(nchain(4))
    vals = bridge_values(dp, 2, 0, ExpField(np.zeros(4), dp.m), 5000, seed=15)
    assert np.all(vals == 0.0)
    est, se = bridge_estimate(dp, 2, 0, ExpField(np.zeros(4), dp.m), 5000, seed=15)
    assert est == 0.0 and se == 0.0


def test_bridge_reproducible():
    rng = rng_stream(47, "path-tests")
    dp = build_dual(random_chain(4, rng))
    f = ProductField()
    a = bridge_values(dp, 0, 1, f, 40_000, seed=16)
    b = bridge_values(dp, 0, 1, f, 40_000, seed=16)
    assert np.array_equal(a, b)


def test_march_chain_bridge_local_time_is_unit_exponential():
    # on the march chain the diagonal bridge sees only its own local time,
    # distributed Exp(1): moments j! for j = 1, 2, 3
    dp = build_dual(nchain(4))
    x = 1
    count = 100_000
    for j, target in ((1, 1.0), (2, 2.0), (3, 6.0)):
        f = MonomialField(np.bincount([x] * j, minlength=4))
        vals = bridge_values(dp, x, x, f, count, seed=17)
        se = vals.std(ddof=1) / np.sqrt(count)
        assert abs(vals.mean() - target) <= 4.0 * se
    # off-diagonal coordinates of the running field vanish at the bridge times
    probe = MonomialField(np.bincount([x + 1], minlength=4))
    vals = bridge_values(dp, x, x, probe, 5000, seed=18)
    assert np.all(vals == 0.0)


def test_bridge_offsets_shift_the_field():
    dp = build_dual(nchain(3))
    chi = np.array([0.5, 0.5, 0.5])
    f = ExpField(chi, dp.m)
    count = 4000
    base = bridge_values(dp, 0, 1, f, count, seed=19)
    shift = np.full((count, 3), 0.3)
    shifted = bridge_values(dp, 0, 1, f, count, seed=19, offsets=shift)
    damp = float(np.exp(-np.sum(chi * dp.m * 0.3)))
    assert np.allclose(shifted, base * damp, rtol=1e-12)
