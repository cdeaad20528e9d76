import math

import numpy as np
import pytest
from scipy.linalg import hadamard

from hdci.certificates import (PAPER_CONSTANTS, Constants, REMode, c1_constant, c2_constant,
                               column_norm_ratio, omega_surrogate, omega_value,
                               restricted_eigenvalue)
from hdci.core import Dataset
from hdci.errors import BadEigenOrder, ConfigError, OracleTooLarge, ZeroKappa

ORACLE = REMode.BRUTE_FORCE_ORACLE


def _data(x):
    return Dataset(x=np.asarray(x, dtype=float), y=np.ones(len(x)))


def _unit_norm_design():
    # +-1 entries: every column has norm sqrt(n) exactly
    return _data(hadamard(8)[:, :5])


def test_omega_clips_to_zero():
    # k ln p / n = 1e-8: 0.25 - 9 * 406 * 1e-4 < 0
    assert omega_value(1.0, 1.0, 1.0, 1 * 4 / 4e8) == 0.0


def test_omega_small_load():
    val = omega_value(1.0, 1.0, 1.0, 1e-10)
    assert val == pytest.approx((0.25 - 3654e-5) ** 2, rel=1e-12)
    assert val == pytest.approx(0.045565, abs=5e-7)


@pytest.mark.parametrize("lmin,lmax,ratio", [(0.5, 2.0, 1.0), (1.0, 1.0, 3.0), (0.1, 7.0, 1.2)])
def test_omega_zero_threshold(lmin, lmax, ratio):
    thresh = (math.sqrt(lmin) / (36 * (1 + 405 * ratio) * math.sqrt(lmax))) ** 2
    assert omega_value(lmin, lmax, ratio, thresh * 1.000001) == 0.0
    assert omega_value(lmin, lmax, ratio, thresh * 0.99) > 0.0


def test_omega_monotone():
    loads = np.geomspace(1e-14, 1e-6, 30)
    vals = [omega_value(0.7, 1.3, 1.1, x) for x in loads]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    vals = [omega_value(0.7, 1.3, r, 1e-11) for r in np.linspace(1, 5, 30)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_omega_surrogate_checks_eigen_order():
    with pytest.raises(BadEigenOrder):
        omega_surrogate(2.0, 1.0, _unit_norm_design(), 1)
    om = omega_surrogate(1.0, 1.0, _unit_norm_design(), 1, plug_in=True)
    assert om.ratio == 1.0 and om.plug_in


def test_c1_unit_norm_branch():
    data = _unit_norm_design()
    assert c1_constant(data, 2, 1e6, 1.0) == pytest.approx(8750.0, rel=1e-14)
    assert c1_constant(data, 2, 1e6, 2.0) == pytest.approx(4 * 8750.0, rel=1e-14)


def test_c1_continuous_at_branch_switch():
    data = _unit_norm_design()
    ks = 912 * data.column_norms().max() ** 2 / (1.25 * data.n)
    lo = c1_constant(data, 2, ks * (1 - 1e-12), 1.0)
    hi = c1_constant(data, 2, ks * (1 + 1e-12), 1.0)
    assert lo == pytest.approx(hi, rel=1e-10)
    assert c1_constant(data, 2, ks / 2, 1.0) == pytest.approx(2 * 8750.0, rel=1e-12)


def test_c2_values():
    data = _unit_norm_design()
    assert c2_constant(data, 2, 1e6) == pytest.approx(1027.5, rel=1e-14)
    x = data.x.copy()
    x[:, 2] *= 0.5
    assert c2_constant(_data(x), 2, 1e6) == pytest.approx(2 * 1027.5, rel=1e-14)


def test_constants_reject_zero_kappa():
    with pytest.raises(ZeroKappa):
        c2_constant(_unit_norm_design(), 1, 0.0)


def test_constants_round_trip():
    c = Constants(c1_prefactor=70.0, cone=4.05)
    assert Constants.from_dict(c.to_dict()) == c
    assert PAPER_CONSTANTS.to_dict() == {"c1_prefactor": 7000.0, "re_factor": 912.0,
                                         "c2_prefactor": 822.0, "cone": 405.0,
                                         "omega_factor": 9.0, "lambda_n_prefactor": 12.0}


def test_column_norm_ratio():
    x = np.ones((4, 2))
    x[:, 1] = 3
    assert column_norm_ratio(_data(x)) == 3.0


@pytest.mark.parametrize("k,alpha0", [(1, 0.0), (1, 2.0), (2, 0.0), (2, 1.0)])
def test_kappa_one_on_exactly_orthogonal_design(k, alpha0):
    data = _data(hadamard(8))
    est = restricted_eigenvalue(data, k, alpha0, ORACLE)
    assert est.value == pytest.approx(1.0, abs=1e-12)


def test_kappa_nonincreasing_in_k_and_alpha0():
    data = _data(np.random.default_rng(11).standard_normal((9, 6)))
    grid = {(k, a): restricted_eigenvalue(data, k, a, ORACLE).value
            for k in (1, 2) for a in (0.0, 0.5, 2.0)}
    for a in (0.0, 0.5, 2.0):
        assert grid[(2, a)] <= grid[(1, a)] + 1e-12
    for k in (1, 2):
        assert grid[(k, 0.5)] <= grid[(k, 0.0)] + 1e-12
        assert grid[(k, 2.0)] <= grid[(k, 0.5)] + 1e-12


def test_k1_alpha0_zero_is_min_normalized_column():
    x = np.random.default_rng(2).standard_normal((7, 4))
    est = restricted_eigenvalue(_data(x), 1, 0.0, ORACLE)
    assert est.value == pytest.approx(np.linalg.norm(x, axis=0).min() / math.sqrt(7), rel=1e-12)


def test_full_support_zero_cone_is_smallest_singular_value():
    x = np.random.default_rng(3).standard_normal((12, 2))
    est = restricted_eigenvalue(_data(x), 2, 0.0, ORACLE)
    lam_min = np.linalg.eigvalsh(x.T @ x / 12)[0]
    assert est.value == pytest.approx(math.sqrt(lam_min), rel=1e-9)


def test_oracle_size_limits():
    data = _data(np.random.default_rng(0).standard_normal((5, 13)))
    with pytest.raises(OracleTooLarge):
        restricted_eigenvalue(data, 1, 1.0, ORACLE)
    with pytest.raises(ConfigError):
        restricted_eigenvalue(_unit_norm_design(), 0, 1.0)


def test_heuristic_upper_bounds_oracle_small():
    data = _data(np.random.default_rng(5).standard_normal((8, 6)))
    for k in (1, 2):
        o = restricted_eigenvalue(data, k, 1.0, ORACLE).value
        h = restricted_eigenvalue(data, k, 1.0).value
        assert h >= o - 1e-9
        assert h <= 1.02 * o
