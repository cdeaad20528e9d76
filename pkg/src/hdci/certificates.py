"""Restricted-eigenvalue quantities and the constants built from them.

``restricted_eigenvalue`` has two honest modes. The brute-force oracle
enumerates every support of size <= k (k <= 2, p <= 12), grids the direction
on the support at 0.5 degree steps, refines the best cell by bounded Brent search,
and solves the convex inner problem over the off-support block. The
heuristic searches fewer supports with local descent and therefore returns
an upper estimate of kappa.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import asdict, dataclass

import numba
import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import Dataset
from .errors import BadEigenOrder, ConfigError, OracleTooLarge, ZeroKappa
from .sampler import make_rng

ORACLE_MAX_P = 12
ORACLE_MAX_K = 2
GRID_STEP_DEG = 0.5
FW_GAP_RTOL = 1e-12


@dataclass(frozen=True)
class Constants:
    """Numeric prefactors of the interval radii. Defaults are the published values."""

    c1_prefactor: float = 7000.0
    re_factor: float = 912.0
    c2_prefactor: float = 822.0
    cone: float = 405.0
    omega_factor: float = 9.0
    lambda_n_prefactor: float = 12.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "Constants":
        return cls(**{k: float(v) for k, v in (d or {}).items()})


PAPER_CONSTANTS = Constants()


class REMode(str, enum.Enum):
    BRUTE_FORCE_ORACLE = "BruteForceOracle"
    HEURISTIC_UPPER = "HeuristicUpper"


@dataclass(frozen=True)
class REEstimate:
    value: float
    mode: REMode
    k: int
    alpha0: float
    certificate: tuple | None = None


@dataclass(frozen=True)
class OmegaSurrogate:
    value: float
    lambda_min_used: float
    lambda_max_used: float
    ratio: float
    plug_in: bool


def column_norm_ratio(data: Dataset) -> float:
    norms = data.column_norms()
    return float(norms.max() / norms.min())


def cone_parameter(data: Dataset, constants: Constants = PAPER_CONSTANTS) -> float:
    """The cone width 405 * max||X_j|| / min||X_j|| used inside C1 and C2."""
    return constants.cone * column_norm_ratio(data)


# -- inner convex problem: min_v ||a + B v||^2 subject to ||v||_1 <= r --------


@numba.njit(cache=True, nogil=True)
def _project_l1(v, r):
    m = v.shape[0]
    total = 0.0
    for i in range(m):
        total += abs(v[i])
    if total <= r:
        return v.copy()
    if r <= 0.0:
        return np.zeros(m)
    u = np.sort(np.abs(v))[::-1]
    css = 0.0
    theta = 0.0
    for i in range(m):
        css += u[i]
        t = (css - r) / (i + 1)
        if u[i] - t > 0.0:
            theta = t
    out = np.empty(m)
    for i in range(m):
        mag = abs(v[i]) - theta
        out[i] = np.sign(v[i]) * mag if mag > 0.0 else 0.0
    return out


@numba.njit(cache=True, nogil=True)
def _cone_min(aa, g, h, r, lip, max_iter, tol, gap_tol):
    """min over ||v||_1 <= r of aa + 2 g'v + v'H v by accelerated projected gradient.

    Stops on a small step, once the Frank-Wolfe gap is below gap_tol * aa, or
    when a plain gradient step from the incumbent fails to descend.
    """
    m = g.shape[0]
    if m == 0:
        return aa
    v = np.zeros(m)
    yv = v.copy()
    t = 1.0
    step = 1.0 / (2.0 * lip)
    best = aa
    for it in range(max_iter):
        if it % 10 == 9:
            # Frank-Wolfe gap over the l1 ball bounds the suboptimality of v;
            # checked up front because restarts skip the end of the loop
            gv = 2.0 * (g + h @ v)
            if gv @ v + r * np.max(np.abs(gv)) <= gap_tol * max(aa, 1e-300):
                break
        grad = 2.0 * (g + h @ yv)
        vn = _project_l1(yv - step * grad, r)
        val = aa + 2.0 * (g @ vn) + vn @ (h @ vn)
        # monotone restart keeps the iteration a descent method
        if val > best:
            if t == 1.0:
                # a plain step from v no longer descends: rounding floor reached
                break
            t = 1.0
            yv = v.copy()
            continue
        best = val
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        diff = vn - v
        yv = vn + ((t - 1.0) / tn) * diff
        v = vn
        t = tn
        if math.sqrt(diff @ diff) <= tol * (1.0 + math.sqrt(v @ v)):
            break
    return max(best, 0.0)


class _SupportProblem:
    """Evaluates ||X delta|| / (sqrt(n) ||delta_J||) minimized over the off-support block."""

    def __init__(self, x: np.ndarray, support, alpha0: float):
        self.n = x.shape[0]
        mask = np.zeros(x.shape[1], dtype=bool)
        mask[list(support)] = True
        self.xj = x[:, mask]
        self.xc = x[:, ~mask]
        self.h = self.xc.T @ self.xc
        self.cross = self.xc.T @ self.xj
        self.hj = self.xj.T @ self.xj
        self.lip = float(np.linalg.eigvalsh(self.h)[-1]) if self.h.size else 1.0
        self.alpha0 = alpha0

    def __call__(self, direction) -> float:
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        aa = float(d @ self.hj @ d)
        g = self.cross @ d
        r = self.alpha0 * float(np.abs(d).sum())
        val = _cone_min(aa, g, self.h, r, max(self.lip, 1e-300), 20000, 1e-13, FW_GAP_RTOL)
        return math.sqrt(val / self.n)


def _angle_dir(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def _oracle(x: np.ndarray, k: int, alpha0: float):
    p = x.shape[1]
    step = math.radians(GRID_STEP_DEG)
    angles = np.arange(0.0, math.pi, step)
    best = (math.inf, None, None)
    for size in range(1, k + 1):
        for support in itertools.combinations(range(p), size):
            prob = _SupportProblem(x, support, alpha0)
            if size == 1:
                cand = (prob([1.0]), support, (1.0,))
            else:
                vals = np.array([prob(_angle_dir(a)) for a in angles])
                i = int(np.argmin(vals))
                # bounded Brent on the neighbouring cells; a flat profile
                # (orthonormal design) has no strict bracket
                res = minimize_scalar(lambda th: prob(_angle_dir(th)),
                                      bounds=(angles[i] - step, angles[i] + step),
                                      method="bounded", options={"xatol": 1e-10})
                theta, val = (res.x, res.fun) if res.fun < vals[i] else (angles[i], vals[i])
                cand = (float(val), support, tuple(_angle_dir(theta)))
            if cand[0] < best[0]:
                best = cand
    return best


def _heuristic(x: np.ndarray, k: int, alpha0: float, n_starts: int, max_supports: int,
               seed: int):
    p = x.shape[1]
    rng = make_rng(seed)
    size = min(k, p)
    n_all = math.comb(p, size)
    if n_all <= max_supports:
        supports = list(itertools.combinations(range(p), size))
    else:
        corr = np.abs(np.corrcoef(x, rowvar=False))
        np.fill_diagonal(corr, 0.0)
        seeds = np.argsort(-corr.max(axis=0))
        supports = {tuple(sorted(seeds[:size]))}
        while len(supports) < max_supports:
            supports.add(tuple(sorted(rng.choice(p, size, replace=False).tolist())))
        supports = sorted(supports)

    best = (math.inf, None, None)
    for support in supports:
        prob = _SupportProblem(x, support, alpha0)
        if size == 1:
            cand = (prob([1.0]), support, (1.0,))
        else:
            starts = [np.linalg.eigh(prob.hj)[1][:, 0]]
            starts += [rng.standard_normal(size) for _ in range(n_starts - 1)]
            cand = (math.inf, support, None)
            for z0 in starts:
                res = minimize(lambda z: prob(z) if np.any(z) else math.inf, z0,
                               method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
                if res.fun < cand[0]:
                    z = res.x / np.linalg.norm(res.x)
                    cand = (float(res.fun), support, tuple(z))
        if cand[0] < best[0]:
            best = cand
    return best


def restricted_eigenvalue(data: Dataset, k: int, alpha0: float,
                          mode: REMode | str = REMode.HEURISTIC_UPPER, *,
                          n_starts: int = 4, max_supports: int = 64,
                          seed: int = 0) -> REEstimate:
    mode = REMode(mode)
    if not 1 <= k <= data.p:
        raise ConfigError(f"need 1 <= k <= p, got k={k}")
    if alpha0 < 0:
        raise ConfigError("alpha0 must be nonnegative")
    if mode is REMode.BRUTE_FORCE_ORACLE:
        if data.p > ORACLE_MAX_P or k > ORACLE_MAX_K:
            raise OracleTooLarge(
                f"oracle runs only for p <= {ORACLE_MAX_P}, k <= {ORACLE_MAX_K}")
        val, support, direction = _oracle(data.x, k, alpha0)
    else:
        val, support, direction = _heuristic(data.x, k, alpha0, n_starts, max_supports, seed)
    return REEstimate(value=float(val), mode=mode, k=k, alpha0=float(alpha0),
                      certificate=(support, direction))


def omega_value(lambda_min: float, lambda_max: float, ratio: float, k_log_p_over_n: float,
                constants: Constants = PAPER_CONSTANTS) -> float:
    inner = (1.0 / (4.0 * math.sqrt(lambda_max))
             - constants.omega_factor * (1.0 + constants.cone * ratio)
             / math.sqrt(lambda_min) * math.sqrt(k_log_p_over_n))
    return max(0.0, inner) ** 2


def omega_surrogate(lambda_min: float, lambda_max: float, data: Dataset, k: int, *,
                    plug_in: bool = False,
                    constants: Constants = PAPER_CONSTANTS) -> OmegaSurrogate:
    """Closed-form lower-bound proxy for kappa^2 from the eigenvalues of Omega."""
    if not 0 < lambda_min <= lambda_max:
        raise BadEigenOrder(f"need 0 < lambda_min <= lambda_max, got {lambda_min}, {lambda_max}")
    ratio = column_norm_ratio(data)
    val = omega_value(lambda_min, lambda_max, ratio, k * math.log(data.p) / data.n, constants)
    return OmegaSurrogate(value=val, lambda_min_used=float(lambda_min),
                          lambda_max_used=float(lambda_max), ratio=ratio, plug_in=plug_in)


def _re_constant(prefactor: float, data: Dataset, kappa_sq: float,
                 constants: Constants) -> float:
    if kappa_sq <= 0:
        raise ZeroKappa("kappa^2 must be positive; use the capped branch instead")
    norms = data.column_norms()
    n = data.n
    return prefactor * math.sqrt(n) / norms.min() * max(
        1.25, constants.re_factor * norms.max() ** 2 / (n * kappa_sq))


def c1_constant(data: Dataset, k: int, kappa_sq: float, m1: float,
                constants: Constants = PAPER_CONSTANTS) -> float:
    """Bias constant of the sparse-loading radius (carries the M1^2 factor)."""
    return _re_constant(constants.c1_prefactor * m1 ** 2, data, kappa_sq, constants)


def c2_constant(data: Dataset, k: int, kappa_sq: float,
                constants: Constants = PAPER_CONSTANTS) -> float:
    """Bias constant of the dense-loading radius."""
    return _re_constant(constants.c2_prefactor, data, kappa_sq, constants)
