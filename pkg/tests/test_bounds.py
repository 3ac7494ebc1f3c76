import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaussimag.bounds import (
    CORRELATED_PRIOR,
    GAMMA_NOT_APPLICABLE,
    OPTIMISM_VERIFIED,
    SHORT_HORIZON,
    check_optimism_conditions,
    epsilon_for_delta,
    gamma_bound,
    general_bound,
    ir_cap,
    misspecified_bound,
    tuned_bound,
    varah_check,
)
from gaussimag.envs import EnvSpec
from gaussimag.infotheory import kl_beta_gaussian, target_mutual_information


def test_general_bound_examples():
    assert general_bound(0.0, 5.0, 0.3, 100) == pytest.approx(30.0)
    assert general_bound(1.0, 4.0, 0.0, 100) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        general_bound(-1.0, 1.0, 0.0, 10)


@given(
    st.floats(0, 10), st.floats(0, 10), st.floats(0, 1), st.integers(0, 10_000),
    st.integers(0, 3), st.floats(0.01, 1.0),
)
def test_general_bound_monotone(mi, ir, eps, T, which, bump):
    args = [mi, ir, eps, T]
    bigger = list(args)
    bigger[which] = bigger[which] + (int(bump * 100) if which == 3 else bump)
    assert general_bound(*bigger) >= general_bound(*args)


def test_ir_cap_examples():
    assert ir_cap(2, 3.0) == 12.0
    assert ir_cap(1, 0.5) == 1.0
    assert ir_cap(8, 1.7) == 2 * ir_cap(4, 1.7)
    with pytest.raises(ValueError):
        ir_cap(0, 1.0)


def test_epsilon_examples():
    assert epsilon_for_delta(0.1, 4, np.eye(4)) == pytest.approx(0.2)
    assert epsilon_for_delta(0.0, 4, np.eye(4)) == 0.0
    assert epsilon_for_delta(0.5, 2, np.diag([1.0, 9.0])) == pytest.approx(0.5 * math.sqrt(18))
    assert epsilon_for_delta(0.5, 2, np.diag([1.0, 9.0])) == pytest.approx(2.1213, abs=1e-4)


def test_tuned_bound_example():
    spec = EnvSpec(2, [1, 1], [1, 1], [0.5, 0.5], np.eye(2), 9.0, 200)
    report = tuned_bound(spec)
    # scalar evaluation of 3 * 2 sqrt(200 ln 100) + 2 sqrt(200)
    expected = 6.0 * math.sqrt(200.0 * math.log(100.0)) + 2.0 * math.sqrt(200.0)
    assert report.gaussian_term == pytest.approx(expected, rel=1e-12)
    assert report.gaussian_term == pytest.approx(210.43, abs=0.06)
    assert report.delta_sq_used == pytest.approx(0.01)
    assert report.gamma == 2.0
    kl = 2 * kl_beta_gaussian(1, 1, 0.5, 1.0)
    assert report.kl == pytest.approx(2 * 0.960606, abs=2e-6)
    assert report.kl_term == pytest.approx(2.0 * math.sqrt(2 * 200 * kl))
    assert report.total == pytest.approx(report.gaussian_term + report.kl_term)


def test_tuned_bound_is_theorem_one_instance():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        T = int(rng.integers(n + 1, 5000))
        sigma0 = np.diag(rng.uniform(0.1, 5, n))
        spec = EnvSpec(n, [1] * n, [1] * n, rng.uniform(0, 1, n), sigma0, float(rng.uniform(0.1, 10)), T)
        report = tuned_bound(spec)
        d2 = n / T
        direct = general_bound(
            target_mutual_information(n, d2), ir_cap(n, spec.noise_var), epsilon_for_delta(math.sqrt(d2), n, sigma0), T
        )
        assert report.gaussian_term == pytest.approx(direct, abs=1e-10, rel=1e-12)
        assert report.mi_target == pytest.approx(target_mutual_information(n, d2))


def test_tuned_bound_short_horizon_branch():
    spec = EnvSpec(3, [1] * 3, [1] * 3, [0] * 3, np.diag([1.0, 4.0, 2.0]), 2.0, 3)
    report = tuned_bound(spec)
    assert report.gaussian_term == pytest.approx(3 * math.sqrt(3 * 4.0))
    assert SHORT_HORIZON in report.notes
    assert report.delta_sq_used == 1.0 and report.mi_target == 0.0


def test_tuned_total_nondecreasing_in_horizon():
    spec = EnvSpec(3, [2] * 3, [1] * 3, [0.4, 0.7, 0.1], np.diag([1.0, 0.3, 2.0]), 4.0, 10)
    totals = [tuned_bound(spec, horizon=T).total for T in range(4, 10_001, 7)]
    assert np.all(np.diff(totals) >= 0)


def test_tuned_bound_flags():
    spec = EnvSpec(2, [2, 2], [2, 2], [0.7, 0.7], np.eye(2), 3.0, 500)
    assert OPTIMISM_VERIFIED in tuned_bound(spec).notes
    corr = spec.replace(sigma0=[[1.0, 0.4], [0.4, 1.0]])
    report = tuned_bound(corr)
    assert CORRELATED_PRIOR in report.notes
    assert math.isnan(report.kl_term) and math.isnan(report.total)
    doc = json.loads(report.to_json())
    assert doc["kl_term"] == "nan"


def test_bound_report_table():
    report = tuned_bound(EnvSpec(2, [1, 1], [1, 1], [0.5, 0.5], np.eye(2), 9.0, 200))
    table = report.format_table()
    assert table.splitlines()[0].split() == ["term", "value", "formula"]
    assert "gaussian_term" in table and "210.376" in table


def test_misspecified_bound_composition():
    assert misspecified_bound(1.0, 4.0, 0.0, 100, 2.0, 0.5) == pytest.approx(20.0 + 2.0 * 10.0)
    assert misspecified_bound(1.0, 4.0, 0.0, 100, 2.0, math.inf) == math.inf


def test_gamma_examples():
    assert gamma_bound([0.5, 0.5], np.eye(2)) == 2.0
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        g = gamma_bound(rng.uniform(0, 1, n), np.diag(rng.uniform(0.01, 10, n)))
        assert g is not None and g <= 3.0
    # prior precision [[1, 1], [1, 1.0001]] is PD but has zero dominance margin in row 0
    precision = np.array([[1.0, 1.0], [1.0, 1.0001]])
    assert gamma_bound([0.1, 0.1], np.linalg.inv(precision)) is None


def test_gamma_not_applicable_flag():
    sigma0 = np.linalg.inv(np.array([[1.0, 1.0], [1.0, 1.0001]]))
    spec = EnvSpec(2, [1, 1], [1, 1], [0.1, 0.1], 0.5 * (sigma0 + sigma0.T), 3.0, 100)
    assert GAMMA_NOT_APPLICABLE in tuned_bound(spec).notes


def test_varah_examples():
    alpha, norm, holds = varah_check([[3.0, 1.0], [1.0, 2.0]])
    assert alpha == pytest.approx(1.0)
    # inverse is [[2, -1], [-1, 3]] / 5: row sums 3/5 and 4/5
    assert norm == pytest.approx(0.8)
    assert holds
    for n in (1, 3, 7):
        alpha, norm, holds = varah_check(2 * np.eye(n))
        assert (alpha, norm, holds) == (2.0, 0.5, True)
    alpha, norm, holds = varah_check(np.ones((2, 2)))
    assert alpha == 0.0 and norm == math.inf and holds


@given(st.integers(0, 2**32 - 1))
def test_varah_on_dominant_matrices(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    a = rng.uniform(-1, 1, (n, n))
    off = np.abs(a).sum(axis=1) - np.abs(np.diag(a))
    np.fill_diagonal(a, off + rng.uniform(0.1, 1.0, n))
    alpha, norm, holds = varah_check(a)
    assert alpha > 0 and holds
    assert norm <= 1 / alpha + 1e-12


def test_optimism_conditions():
    good = EnvSpec(2, [2, 2], [2, 2], [0.7, 0.7], np.eye(2), 3.0, 100)
    assert check_optimism_conditions(good) == (True, [])
    passes, violations = check_optimism_conditions(good.replace(noise_var=2.0))
    assert not passes and "(iii) σ² ≥ 3" in violations
    passes, violations = check_optimism_conditions(good.replace(sigma0=[[1.0, 0.1], [0.1, 1.0]]))
    assert not passes and "(iv) Σ₀ diagonal" in violations
    passes, violations = check_optimism_conditions(good.replace(alpha=[1, 1], beta=[1, 1]))
    assert any(v.startswith("(i)") for v in violations)
    passes, violations = check_optimism_conditions(good.replace(mu0=[0.6, 0.7]))
    assert violations == ["(v) μ₀,a ≥ (α_a/σ²) Σ₀,aa"]
