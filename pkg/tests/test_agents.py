import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaussimag.agents import (
    ActionDist,
    _clark,
    _diag_quadrature,
    _qmc,
    expected_max_gaussian,
    ids_action,
    ids_distribution_batch,
    info_gain_per_arm,
    information_ratio,
    max_stats,
    max_stats_batch,
    sample_from_dist,
    target_info_gain_per_arm,
    ts_action,
    uniform_action,
)
from gaussimag.belief import GaussianBelief, batch_posterior, target_conditional_covs, update_gaussian
from gaussimag.envs import EnvSpec, History, replication_rng
from gaussimag.validation import random_spd, simplex_grid


def belief(mean, cov, noise_var=1.0):
    return GaussianBelief.from_prior(mean, cov, noise_var)


def ts_frequencies(b, n, seed=0):
    rng = replication_rng(seed, 0)
    arms = [ts_action(b, rng)[0] for _ in range(n)]
    return np.bincount(arms, minlength=b.num_arms) / n


def test_ts_separated_means():
    freq = ts_frequencies(belief([1.0, 0.0], np.diag([1e-18, 1e-18])), 10_000)
    np.testing.assert_array_equal(freq, [1.0, 0.0])


@pytest.mark.parametrize("rho", [0.0, 0.999])
def test_ts_symmetric_beliefs(rho):
    freq = ts_frequencies(belief([0.0, 0.0], [[1.0, rho], [rho, 1.0]]), 10_000, seed=3)
    np.testing.assert_allclose(freq, 0.5, atol=0.02)


def test_ts_diagnostics():
    b = belief([0.2, 0.0, -0.1], np.diag([1.0, 0.5, 2.0]), 2.0)
    arm, diag = ts_action(b, replication_rng(0, 0))
    assert 0 <= arm < 3
    np.testing.assert_allclose(diag.info_gain_per_arm, 0.5 * np.log1p(np.diag(b.cov) / 2.0))
    assert np.all(diag.expected_regret_per_arm >= 0)
    assert diag.ratio_value == pytest.approx(
        information_ratio(diag.chosen_dist.probs, diag.expected_regret_per_arm, diag.info_gain_per_arm)
    )


def test_ts_argmax_invariant_to_common_shift():
    rng = np.random.default_rng(0)
    cov = random_spd(rng, 4)
    mean = rng.normal(size=4)
    for seed in range(300):
        a, _ = ts_action(belief(mean, cov), replication_rng(seed, 0))
        b, _ = ts_action(belief(mean + 3.0, cov), replication_rng(seed, 0))
        assert a == b


def test_expected_max_examples():
    assert expected_max_gaussian([0.37], [[2.0]]) == 0.37
    assert expected_max_gaussian([0.0, 0.0], np.eye(2)) == pytest.approx(1 / math.sqrt(math.pi), abs=1e-3)
    assert expected_max_gaussian([0.0, 0.0], np.eye(2), "oracle") == pytest.approx(1 / math.sqrt(math.pi), abs=1e-3)
    assert expected_max_gaussian([10.0, 0.0], np.eye(2)) == pytest.approx(10.0, abs=1e-4)
    with pytest.raises(ValueError):
        max_stats([0.0], [[1.0]], quality="slow")


def test_three_iid_standard_normals():
    emax, probs = max_stats(np.zeros(3), np.eye(3))
    assert emax == pytest.approx(3 / (2 * math.sqrt(math.pi)), abs=1e-8)
    np.testing.assert_allclose(probs, 1 / 3, atol=1e-8)


def test_quadrature_matches_clark_on_two_arms():
    rng = np.random.default_rng(1)
    means = rng.normal(size=(500, 2))
    var = np.exp(rng.uniform(-8, 3, size=(500, 2)))
    e1, p1 = _diag_quadrature(means, np.sqrt(var))
    e2, p2 = _clark(means, var[:, 0], var[:, 1], np.zeros(500))
    np.testing.assert_allclose(e1, e2, atol=1e-7 * np.sqrt(var.max(axis=1)).max() + 1e-9)
    np.testing.assert_allclose(p1, p2, atol=1e-7)


@pytest.mark.parametrize("seed", [0, 1])
def test_fast_paths_match_monte_carlo_oracle(seed):
    rng = np.random.default_rng(seed)
    mean = rng.normal(size=4)
    for cov in (np.diag(rng.uniform(0.2, 2.0, 4)), random_spd(rng, 4)):
        fast_e, fast_p = max_stats(mean, cov)
        mc_e, mc_p = max_stats(mean, cov, "oracle", seed=seed)
        # 1e7 samples: standard error of order 3e-4
        assert fast_e == pytest.approx(mc_e, abs=2e-3)
        np.testing.assert_allclose(fast_p, mc_p, atol=2e-3)


def test_correlated_two_arm_clark_matches_qmc():
    mean = np.array([[0.3, -0.2]])
    cov = np.array([[[1.0, 0.6], [0.6, 2.0]]])
    e1, p1 = max_stats_batch(mean, covs=cov)
    e2, p2 = _qmc(mean, cov)
    assert e1[0] == pytest.approx(e2[0], abs=5e-3)
    np.testing.assert_allclose(p1, p2, atol=5e-3)


def test_max_stats_is_deterministic():
    rng = np.random.default_rng(9)
    cov = random_spd(rng, 3)
    assert max_stats([0, 0.1, 0.2], cov)[0] == max_stats([0, 0.1, 0.2], cov)[0]


def test_info_gain_examples():
    b = belief([0, 0], np.diag([2.0, 1e-300]), 2.0)
    gains = info_gain_per_arm(b)
    assert gains[0] == pytest.approx(0.5 * math.log(2))
    assert gains[1] == pytest.approx(0.0, abs=1e-300)
    b = belief([0, 0], np.eye(2), 1.0)
    for k in range(1, 12):
        b = update_gaussian(b, 0, float(k % 2))
        assert info_gain_per_arm(b)[0] == pytest.approx(0.5 * math.log1p(1 / (k + 1)), abs=1e-12)


def test_info_gain_ignores_rewards():
    spec = EnvSpec(3, [1] * 3, [1] * 3, [0] * 3, np.diag([1.0, 2.0, 0.5]), 1.5, 30)
    rng = np.random.default_rng(4)
    arms = rng.integers(0, 3, 30)
    g1 = info_gain_per_arm(batch_posterior(spec, History.from_arrays(arms, rng.integers(0, 2, 30))))
    g2 = info_gain_per_arm(batch_posterior(spec, History.from_arrays(arms, rng.integers(0, 2, 30))))
    np.testing.assert_array_equal(g1, g2)


def test_target_gain_scalar_formula_matches_joint_conditioning():
    spec = EnvSpec(3, [1] * 3, [1] * 3, [0] * 3, np.diag([1.0, 2.0, 0.5]), 1.5, 30, delta_sq=0.2)
    counts = np.array([[0.0, 3.0, 7.0], [4.0, 0.0, 1.0]])
    cov, given = target_conditional_covs(spec, counts)
    var, var_given = np.einsum("...ii->...i", cov), np.einsum("...ii->...i", given)
    expected = 0.5 * np.log((var + 1.5) / (var_given + 1.5))
    np.testing.assert_allclose(target_info_gain_per_arm(spec, counts), expected, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
def test_target_gain_below_full_gain(seed, d2):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    spec = EnvSpec(n, [1] * n, [1] * n, [0] * n, random_spd(rng, n), float(rng.uniform(0.2, 5)), 10, delta_sq=d2)
    counts = rng.integers(0, 20, n).astype(float)
    target = target_info_gain_per_arm(spec, counts)
    cov, _ = target_conditional_covs(spec, counts)
    full = 0.5 * np.log1p(np.diag(cov) / spec.noise_var)
    assert np.all(target >= -1e-12)
    assert np.all(target <= full + 1e-12)


def test_ids_exchangeable_two_arms():
    b = belief([0.3, 0.3], np.eye(2) * 0.7, 2.0)
    _, diag = ids_action(b, replication_rng(0, 0))
    np.testing.assert_allclose(diag.chosen_dist.probs, [0.5, 0.5], atol=1e-9)


def test_ids_zero_regret_arm_is_played():
    probs, ratio, degenerate = ids_distribution_batch(np.array([[0.4, 0.0, 0.2]]), np.array([[0.3, 0.1, 0.5]]))
    np.testing.assert_array_equal(probs[0], [0.0, 1.0, 0.0])
    assert ratio[0] == 0.0 and not degenerate[0]


def test_ids_degenerate_information_exploits():
    probs, ratio, degenerate = ids_distribution_batch(np.array([[0.2, 0.05, 0.4]]), np.zeros((1, 3)))
    np.testing.assert_array_equal(probs[0], [0, 1, 0])
    assert degenerate[0] and ratio[0] == 0.0
    b = belief([1.0, 0.0], np.diag([1e-40, 1e-40]))
    arm, diag = ids_action(b, replication_rng(0, 0))
    assert arm == 0 and diag.degenerate


@given(st.integers(0, 2**32 - 1))
def test_ids_beats_coarse_grid(seed):
    rng = np.random.default_rng(seed)
    regrets = rng.uniform(0, 2, (1, 3)) * (rng.random((1, 3)) > 0.2)
    gains = rng.uniform(0, 1, (1, 3))
    probs, ratio, _ = ids_distribution_batch(regrets, gains)
    grid = simplex_grid(150)
    assert ratio[0] <= information_ratio(grid, regrets[0], gains[0]).min() + 1e-9
    assert np.sum(probs[0] > 1e-12) <= 2
    assert information_ratio(probs[0], regrets[0], gains[0]) == pytest.approx(ratio[0], rel=1e-9, abs=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_ids_support_at_most_two(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    probs, _, _ = ids_distribution_batch(rng.uniform(0, 1, (5, n)), rng.uniform(0, 1, (5, n)))
    assert np.all(np.sum(probs > 1e-12, axis=1) <= 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_ids_ratio_below_sampled_ts_ratio(seed):
    rng = np.random.default_rng(seed)
    b = belief(rng.normal(size=3), random_spd(rng, 3), float(rng.uniform(0.5, 3)))
    _, ids_diag = ids_action(b, replication_rng(seed, 0))
    draws = rng.multivariate_normal(b.mean, b.cov, size=10_000)
    ts_dist = np.bincount(draws.argmax(axis=1), minlength=3) / 10_000
    regrets, gains = ids_diag.expected_regret_per_arm, ids_diag.info_gain_per_arm
    ts_ratio = information_ratio(ts_dist, regrets, gains)
    boot = [information_ratio(rng.multinomial(10_000, ts_dist) / 10_000, regrets, gains) for _ in range(200)]
    assert ids_diag.ratio_value <= ts_ratio + 3 * np.std(boot)


def test_sample_from_dist_inverse_cdf():
    probs = np.array([0.2, 0.0, 0.8])
    u = np.linspace(0, 1, 10_000, endpoint=False)
    arms = sample_from_dist(np.tile(probs, (u.size, 1)), u)
    np.testing.assert_allclose(np.bincount(arms, minlength=3) / u.size, probs, atol=1e-3)


def test_uniform_agent():
    rng = replication_rng(0, 0)
    arms = [uniform_action(4, rng) for _ in range(100_000)]
    np.testing.assert_allclose(np.bincount(arms) / 1e5, 0.25, atol=0.01)
    assert all(uniform_action(1, rng) == 0 for _ in range(50))
    a = [uniform_action(5, replication_rng(8, 1)) for _ in range(3)]
    b = [uniform_action(5, replication_rng(8, 1)) for _ in range(3)]
    assert a == b


def test_action_dist_validation():
    with pytest.raises(ValueError):
        ActionDist([0.5, 0.6])
    with pytest.raises(ValueError):
        ActionDist([1.2, -0.2])
    assert ActionDist([0.5, 0.5, 0.0]).support_size == 2
