import numpy as np
import pytest

from fixtures_data import SCORE_QP_FIXTURES
from hdci.core import Dataset
from hdci.debias import (debiased_estimate, default_lambda_n, dual_value, error_decomposition,
                         min_feasible_lambda, solve_score, split_estimate)
from hdci.errors import (ConfigError, DegenerateSplit, DimensionMismatch, InfeasibleScoreQP,
                         NotPSD)
from hdci.estimators import scaled_lasso
from hdci.sampler import BetaSpec, SamplerConfig, make_rng, sample_instance
from oracles import min_feasible_lambda_primal, score_qp_active_set


def _instance(seed=0, n=80, p=40, k=3, sigma=1.0):
    return sample_instance(SamplerConfig(seed=seed, n=n, p=p, sigma=sigma,
                                         beta=BetaSpec(k=k, magnitude=0.8)))


def test_identity_gram_shrinks_coordinate():
    sol = solve_score(np.eye(4), np.array([1.0, 0, 0, 0]), 0.1)
    assert np.allclose(sol.u_hat, [0.9, 0, 0, 0], atol=1e-12)
    assert sol.objective == pytest.approx(0.81, abs=1e-12)


def test_large_lambda_gives_zero():
    xi = np.array([0.3, -0.7, 0.2])
    sol = solve_score(np.diag([1.0, 2.0, 3.0]), xi, 0.7)
    assert np.all(sol.u_hat == 0) and sol.objective == 0


@pytest.mark.parametrize("fx", SCORE_QP_FIXTURES[:3])
def test_live_active_set_oracle(fx):
    mat, xi, lam, _, _ = fx
    u, obj = score_qp_active_set(np.array(mat), np.array(xi), lam)
    sol = solve_score(np.array(mat), np.array(xi), lam)
    assert abs(sol.objective - obj) <= 1e-5
    assert np.max(np.abs(sol.u_hat - u)) <= 1e-4


def test_active_set_fixture_stated_example():
    mat, xi, lam, u, obj = SCORE_QP_FIXTURES[0]
    assert xi == [1.0, 1.0, 0.0] and lam == 0.05
    sol = solve_score(np.array(mat), np.array(xi), lam)
    assert np.allclose(sol.u_hat, u, atol=1e-6)


def test_duality_gap_certificate():
    data, _ = _instance(seed=1, n=50, p=120)
    xi = np.zeros(120)
    xi[0] = 1
    sol = solve_score(data.gram(), xi, 0.3)
    gram = data.gram()
    assert sol.duality_gap <= 1e-7 * max(1, sol.objective)
    assert sol.objective - dual_value(gram, xi, sol.u_hat, 0.3) == pytest.approx(
        sol.duality_gap, abs=1e-12)
    assert np.max(np.abs(gram @ sol.u_hat - xi)) <= 0.3 + 1e-8


def test_objective_nonincreasing_in_lambda():
    data, _ = _instance(seed=2, n=60, p=100)
    xi = np.zeros(100)
    xi[:3] = [1, -0.5, 0.25]
    objs = [solve_score(data.gram(), xi, lam).objective for lam in (0.2, 0.3, 0.5, 0.8, 1.0)]
    assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))


def test_xi_scaling():
    data, _ = _instance(seed=3, n=60, p=90)
    xi = np.zeros(90)
    xi[4] = 1
    base = solve_score(data.gram(), xi, default_lambda_n(xi, 60, 90, 1.0, 1.0))
    fit = scaled_lasso(data)
    mu = debiased_estimate(data, xi, fit, base).mu_tilde
    for c in (0.5, 4.0):
        sol = solve_score(data.gram(), c * xi, default_lambda_n(c * xi, 60, 90, 1.0, 1.0))
        assert np.allclose(sol.u_hat, c * base.u_hat, atol=1e-7 * c)
        assert sol.objective == pytest.approx(c * c * base.objective, rel=1e-6)
        assert debiased_estimate(data, c * xi, fit, sol).mu_tilde == pytest.approx(c * mu,
                                                                                   rel=1e-6)


def test_rank_deficient_gram_uses_lp():
    rng = make_rng(4)
    x = rng.standard_normal((5, 12))
    gram = x.T @ x / 5
    xi = np.zeros(12)
    xi[0] = 1
    lam_min = min_feasible_lambda(gram, xi)
    assert lam_min == pytest.approx(min_feasible_lambda_primal(gram, xi), abs=1e-8)
    assert 0 < lam_min < 1
    with pytest.raises(InfeasibleScoreQP):
        solve_score(gram, xi, 0.5 * lam_min)
    sol = solve_score(gram, xi, 0.5 * lam_min, auto_escalate=True)
    assert sol.escalations >= 1 and sol.lambda_n > lam_min
    assert sol.lambda_n == pytest.approx(0.5 * lam_min * 1.5 ** sol.escalations)


def test_full_rank_gram_always_feasible():
    assert min_feasible_lambda(np.diag([1.0, 2.0]), np.array([1.0, 1.0])) == 0.0


def test_input_validation():
    with pytest.raises(NotPSD):
        solve_score(np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([1.0, 0]), 0.1)
    with pytest.raises(DimensionMismatch):
        solve_score(np.eye(3), np.ones(2), 0.1)
    with pytest.raises(ConfigError):
        solve_score(np.eye(2), np.zeros(2), 0.1)
    with pytest.raises(ConfigError):
        solve_score(np.eye(2), np.ones(2), 0.0)


def test_error_decomposition_identity():
    data, params = _instance(seed=5)
    eps = data.y - data.x @ params.beta
    xi = np.zeros(data.p)
    xi[1] = 1
    fit = scaled_lasso(data)
    est = debiased_estimate(data, xi, fit, solve_score(data.gram(), xi, 0.2))
    lhs, rhs = error_decomposition(data, xi, est, params.beta, eps)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_no_correction_cases():
    data, _ = _instance(seed=6)
    xi = np.zeros(data.p)
    xi[0] = 1
    fit = scaled_lasso(data)
    zero = solve_score(data.gram(), xi, 1.0)
    assert debiased_estimate(data, xi, fit, zero).mu_tilde == xi @ fit.beta_hat


def test_exact_fit_means_no_correction():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    beta = np.array([0.7, -0.2])
    data = Dataset(x=x, y=x @ beta)

    class Exact:
        beta_hat = beta

    sol = solve_score(data.gram(), np.array([1.0, 0.0]), 0.01)
    assert debiased_estimate(data, [1.0, 0.0], Exact, sol).mu_tilde == pytest.approx(0.7,
                                                                                      abs=1e-15)


def test_split_estimate_noiseless_second_half():
    x = make_rng(7).standard_normal((20, 5))
    beta = np.array([1.0, 0, 0, -2.0, 0])
    data = Dataset(x=x, y=x @ beta)
    est = split_estimate(data, np.array([0, 0, 0, 1.0, 0]), 0.0, seed=3)
    assert est.fit.lam == 1e-12
    # second-half residual is (numerically) zero, so mu_bar equals xi'beta_hat
    assert est.mu_bar == pytest.approx(-2.0, abs=1e-8)


def test_split_estimate_deterministic_and_odd_n():
    data, _ = _instance(seed=8, n=41, p=10)
    xi = np.eye(10)[0]
    a = split_estimate(data, xi, 1.0, seed=11)
    b = split_estimate(data, xi, 1.0, seed=11)
    assert a.mu_bar == b.mu_bar and a.n1 == a.n2 == 20
    assert "dropped_observation" in a.diagnostics
    with pytest.raises(DegenerateSplit):
        split_estimate(Dataset(x=np.eye(3), y=np.ones(3)), np.ones(3), 1.0, 0)


def test_split_estimate_null_band():
    # beta = 0, n2 = 100: mu_bar is centred at 0 with scale about 1/10
    vals = []
    for s in range(200):
        data, _ = sample_instance(SamplerConfig(seed=s, n=200, p=50, beta=BetaSpec(k=0)))
        vals.append(split_estimate(data, np.eye(50)[0], 1.0, seed=s).mu_bar)
    vals = np.array(vals)
    assert np.all(np.abs(vals) <= 4 * 0.1)
    assert abs(vals.mean()) < 3 * 0.1 / np.sqrt(200)
    assert 0.08 < vals.std() < 0.125
