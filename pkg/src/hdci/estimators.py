"""Scaled Lasso and column-weighted Lasso with KKT certification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._cd import cd_gram
from .core import Dataset
from .errors import ConfigError, DegenerateResponse, MaxIterations, SolverError, ZeroColumn

INNER_TOL = 1e-10
KKT_TOL = 1e-6
SIGMA_RTOL = 1e-8
MAX_OUTER = 500
MAX_SWEEPS = 200_000
KKT_ABS_FLOOR = 1e-12
TIGHTEN_STEPS = 6


@dataclass(frozen=True)
class LassoFit:
    beta_hat: np.ndarray
    lam: float
    iterations: int
    kkt_residual: float


@dataclass(frozen=True)
class ScaledLassoFit:
    beta_hat: np.ndarray
    sigma_hat: float
    lambda0: float
    iterations: int
    kkt_residual: float
    kkt_history: list = field(default_factory=list)


@dataclass(frozen=True)
class NormalizedModel:
    d: np.ndarray
    w: np.ndarray


def default_lambda0(n: int, p: int) -> float:
    """Universal penalty level sqrt(2.05 ln p / n)."""
    return math.sqrt(2.05 * math.log(p) / n)


def normalize(data: Dataset) -> NormalizedModel:
    norms = data.column_norms()
    if np.any(norms == 0):
        raise ZeroColumn("cannot normalize a zero column")
    d = math.sqrt(data.n) / norms
    return NormalizedModel(d=d, w=data.x * d)


def penalty_weights(data: Dataset) -> np.ndarray:
    """Per-coordinate weights ||X_j||_2 / sqrt(n)."""
    return data.column_norms() / math.sqrt(data.n)


def lasso_objective(data: Dataset, beta, lam: float) -> float:
    r = data.y - data.x @ beta
    return float(r @ r / (2 * data.n) + lam * penalty_weights(data) @ np.abs(beta))


def scaled_lasso_objective(data: Dataset, beta, sigma: float, lambda0: float) -> float:
    r = data.y - data.x @ beta
    return float(r @ r / (2 * data.n * sigma) + sigma / 2
                 + lambda0 * penalty_weights(data) @ np.abs(beta))


def kkt_residual(data: Dataset, beta, lam: float) -> float:
    """Largest subgradient violation of the weighted Lasso at ``lam``, relative to ``lam``."""
    corr = data.x.T @ (data.y - data.x @ beta) / data.n
    thresh = lam * penalty_weights(data)
    active = beta != 0
    viol = np.where(active, np.abs(corr - thresh * np.sign(beta)),
                    np.maximum(np.abs(corr) - thresh, 0.0))
    return float(viol.max() / lam) if viol.size else 0.0


def _solve_weighted(gram, c, pen, beta, tol, max_sweeps):
    grad = c - gram @ beta
    sweeps = cd_gram(gram, c, pen, beta, grad, tol, max_sweeps)
    if sweeps < 0:
        raise MaxIterations(f"coordinate descent did not converge in {max_sweeps} sweeps")
    return sweeps


def _response_scale(data: Dataset) -> float:
    return max(float(np.linalg.norm(data.y)) / math.sqrt(data.n), 1e-300)


def lasso(data: Dataset, lam: float, *, tol: float = INNER_TOL, kkt_tol: float = KKT_TOL,
          max_sweeps: int = MAX_SWEEPS, beta0=None) -> LassoFit:
    """Minimize ||y - X b||^2 / (2n) + lam * sum_j (||X_j|| / sqrt(n)) |b_j|.

    ``tol`` is relative to ||y|| / sqrt(n). If the KKT certificate fails, the
    step tolerance is tightened (warm start) a few times before giving up.
    """
    if lam <= 0:
        raise ConfigError("lambda must be positive")
    gram = data.gram()
    c = data.x.T @ data.y / data.n
    pen = lam * penalty_weights(data)
    beta = np.zeros(data.p) if beta0 is None else np.array(beta0, dtype=float)
    step = tol * _response_scale(data)
    sweeps = 0
    for _ in range(TIGHTEN_STEPS):
        sweeps += _solve_weighted(gram, c, pen, beta, step, max_sweeps)
        res = kkt_residual(data, beta, lam)
        if res <= kkt_tol:
            break
        step /= 100
    # tiny penalties (the lambda floor) are certified on an absolute scale
    if res > kkt_tol and res * lam > KKT_ABS_FLOOR:
        raise SolverError(f"lasso KKT residual {res:.3g} exceeds {kkt_tol}")
    return LassoFit(beta_hat=beta, lam=float(lam), iterations=sweeps, kkt_residual=res)


def lasso_sweep_objectives(data: Dataset, lam: float, sweeps: int) -> list[float]:
    """Objective after each of the first ``sweeps`` coordinate-descent sweeps."""
    gram = data.gram()
    c = data.x.T @ data.y / data.n
    pen = lam * penalty_weights(data)
    beta = np.zeros(data.p)
    grad = c.copy()
    out = [lasso_objective(data, beta, lam)]
    for _ in range(sweeps):
        cd_gram(gram, c, pen, beta, grad, -1.0, 1)
        out.append(lasso_objective(data, beta, lam))
    return out


def scaled_lasso(data: Dataset, lambda0: float | None = None, *, tol: float = INNER_TOL,
                 kkt_tol: float = KKT_TOL, max_outer: int = MAX_OUTER,
                 max_sweeps: int = MAX_SWEEPS) -> ScaledLassoFit:
    """Joint (beta, sigma) fit by alternating a Lasso step at penalty
    ``lambda0 * sigma`` with the update ``sigma = ||y - X beta|| / sqrt(n)``.

    Each Lasso step is warm-started from the previous one. Stops once sigma
    moves by at most 1e-8 * sigma. Tolerances are relative to ||y|| / sqrt(n),
    so rescaling y rescales the fit.
    """
    if lambda0 is None:
        lambda0 = default_lambda0(data.n, data.p)
    if lambda0 <= 0:
        raise ConfigError("lambda0 must be positive")
    ynorm = float(np.linalg.norm(data.y))
    if ynorm == 0:
        raise DegenerateResponse("y is identically zero")

    n = data.n
    gram = data.gram()
    c = data.x.T @ data.y / n
    w = penalty_weights(data)
    beta = np.zeros(data.p)
    sigma = ynorm / math.sqrt(n)
    scale = sigma
    history = []
    for outer in range(1, max_outer + 1):
        _solve_weighted(gram, c, lambda0 * sigma * w, beta, tol * scale, max_sweeps)
        new_sigma = float(np.linalg.norm(data.y - data.x @ beta)) / math.sqrt(n)
        if new_sigma == 0:
            raise DegenerateResponse("residual vanished; sigma_hat hit the boundary 0")
        history.append(kkt_residual(data, beta, lambda0 * new_sigma))
        converged = abs(new_sigma - sigma) <= SIGMA_RTOL * sigma
        sigma = new_sigma
        if converged:
            break
    else:
        raise MaxIterations(f"scaled lasso alternation did not settle in {max_outer} rounds")

    res = history[-1]
    if res > kkt_tol:
        raise SolverError(f"scaled lasso KKT residual {res:.3g} exceeds {kkt_tol}")
    return ScaledLassoFit(beta_hat=beta, sigma_hat=sigma, lambda0=float(lambda0),
                          iterations=outer, kkt_residual=res, kkt_history=history)
