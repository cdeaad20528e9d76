"""Score-vector QP, the de-biased functional estimator and the split-sample estimator.

The score QP

    min_u  u' S u   subject to   ||S u - xi||_inf <= lam

is solved through its Lagrangian dual. With multiplier nu = -2w the dual is

    max_w  2 xi'w - w'S w - 2 lam ||w||_1,

a Lasso in w whose optimality conditions say ||S w - xi||_inf <= lam, so the
dual solution w is itself primal feasible and optimal (u = w). The gap
u'S u - (2 xi'w - w'S w - 2 lam ||w||_1) is reported as the certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ._cd import cd_gram
from .core import Dataset
from .errors import (ConfigError, DegenerateSplit, DimensionMismatch, InfeasibleScoreQP,
                     MaxIterations, NotPSD, SolverError)
from .estimators import LassoFit, ScaledLassoFit, lasso
from .sampler import make_rng

ESCALATION_FACTOR = 1.5
MAX_ESCALATIONS = 10
GAP_RTOL = 1e-7
QP_TOL = 1e-12
QP_MAX_SWEEPS = 500_000
QUICK_SWEEPS = 2_000
LAMBDA_FLOOR = 1e-12


@dataclass(frozen=True)
class ScoreSolution:
    u_hat: np.ndarray
    objective: float
    infeasibility: float
    duality_gap: float
    lambda_n: float
    escalations: int
    multipliers: np.ndarray
    iterations: int = 0


@dataclass(frozen=True)
class DebiasedEstimate:
    mu_tilde: float
    variance_proxy: float
    fit: ScaledLassoFit
    score: ScoreSolution


@dataclass(frozen=True)
class SplitEstimate:
    mu_bar: float
    n1: int
    n2: int
    fit: LassoFit
    sigma0: float
    diagnostics: dict = field(default_factory=dict)


def default_lambda_n(xi, n: int, p: int, m1: float, prefactor: float = 12.0) -> float:
    """prefactor * ||xi||_2 * M1^2 * sqrt(ln p / n)."""
    return prefactor * float(np.linalg.norm(xi)) * m1 ** 2 * math.sqrt(math.log(p) / n)


def feasibility_tolerance(xi) -> float:
    return 1e-8 * (1.0 + float(np.max(np.abs(xi))))


def _check_psd(mat: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > 1e-10 * scale:
        raise NotPSD("matrix is not symmetric")
    try:
        np.linalg.cholesky(mat + 1e-10 * scale * np.eye(mat.shape[0]))
    except np.linalg.LinAlgError as exc:
        if np.linalg.eigvalsh(mat)[0] < -1e-10 * scale:
            raise NotPSD("matrix is not positive semidefinite") from exc


def min_feasible_lambda(mat: np.ndarray, xi: np.ndarray) -> float:
    """Smallest lam for which ||S u - xi||_inf <= lam is attainable.

    By LP duality this equals max xi'z over z in null(S) with ||z||_1 <= 1,
    an LP whose equality block has only rank(S) rows.
    """
    p = xi.size
    evals, evecs = np.linalg.eigh(mat)
    keep = evals > 1e-10 * max(float(evals[-1]), 0.0)
    basis = evecs[:, keep].T
    if basis.shape[0] == p:
        return 0.0
    cost = -np.concatenate([xi, -xi])
    a_eq = np.hstack([basis, -basis]) if basis.shape[0] else None
    b_eq = np.zeros(basis.shape[0]) if basis.shape[0] else None
    res = linprog(cost, A_ub=np.ones((1, 2 * p)), b_ub=[1.0], A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"feasibility LP failed: {res.message}")
    return max(0.0, float(-res.fun))


def _is_feasible(mat: np.ndarray, xi: np.ndarray, lam: float) -> bool:
    if lam >= np.max(np.abs(xi)):
        return True
    try:
        chol = np.linalg.cholesky(mat)
        d = np.diag(chol) ** 2
        if d.min() > 1e-10 * d.max():
            return True
    except np.linalg.LinAlgError:
        pass
    return lam > min_feasible_lambda(mat, xi) * (1 + 1e-6) + 1e-12


def dual_value(mat: np.ndarray, xi: np.ndarray, w: np.ndarray, lam: float) -> float:
    """Lagrangian dual bound at w: 2 xi'w - w'S w - 2 lam ||w||_1."""
    return float(2 * xi @ w - w @ mat @ w - 2 * lam * np.abs(w).sum())


def _violation(mat, xi, w, lam) -> float:
    return max(0.0, float(np.max(np.abs(mat @ w - xi))) - lam)


def _dual_cd(mat, xi, lam, step_tol, max_sweeps):
    w = np.zeros(xi.size)
    grad = xi.copy()
    sweeps = cd_gram(mat, xi, np.full(xi.size, lam), w, grad, step_tol, max_sweeps)
    return w, sweeps


def solve_score(sigma_hat_matrix, xi, lambda_n: float, *, auto_escalate: bool = False,
                max_escalations: int = MAX_ESCALATIONS, tol: float = QP_TOL,
                max_sweeps: int = QP_MAX_SWEEPS) -> ScoreSolution:
    mat = np.asarray(sigma_hat_matrix, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if mat.shape != (xi.size, xi.size):
        raise DimensionMismatch(f"matrix {mat.shape} vs xi of length {xi.size}")
    if not np.any(xi != 0):
        raise ConfigError("xi must be nonzero")
    if lambda_n <= 0:
        raise ConfigError("lambda_n must be positive")
    _check_psd(mat)

    lam = float(lambda_n)
    step_tol = tol * max(1.0, float(np.max(np.abs(xi))))
    ftol = feasibility_tolerance(xi)
    escalations = 0
    while True:
        # a short run that converges to a point meeting the constraint is its
        # own feasibility certificate; otherwise the LP decides
        w, sweeps = _dual_cd(mat, xi, lam, step_tol, QUICK_SWEEPS)
        if sweeps > 0 and _violation(mat, xi, w, lam) <= ftol:
            break
        if _is_feasible(mat, xi, lam):
            w, sweeps = _dual_cd(mat, xi, lam, step_tol, max_sweeps)
            if sweeps < 0:
                raise MaxIterations("score QP dual did not converge")
            break
        if not auto_escalate or escalations >= max_escalations:
            raise InfeasibleScoreQP(
                f"no u satisfies ||S u - xi||_inf <= {lam:.6g} "
                f"(after {escalations} escalations)")
        lam *= ESCALATION_FACTOR
        escalations += 1

    objective = float(w @ mat @ w)
    infeas = _violation(mat, xi, w, lam)
    gap = objective - dual_value(mat, xi, w, lam)
    if infeas > ftol:
        raise SolverError(f"score QP infeasibility {infeas:.3g} above tolerance")
    if gap > GAP_RTOL * max(1.0, objective):
        raise SolverError(f"score QP duality gap {gap:.3g} above tolerance")
    return ScoreSolution(u_hat=w, objective=max(objective, 0.0), infeasibility=infeas,
                         duality_gap=gap, lambda_n=lam, escalations=escalations,
                         multipliers=-2.0 * w, iterations=sweeps)


def debiased_estimate(data: Dataset, xi, fit: ScaledLassoFit,
                      score: ScoreSolution) -> DebiasedEstimate:
    """xi'beta_hat + u_hat' X'(y - X beta_hat) / n."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != data.p or fit.beta_hat.size != data.p or score.u_hat.size != data.p:
        raise DimensionMismatch("xi, beta_hat and u_hat must all have length p")
    resid = data.y - data.x @ fit.beta_hat
    mu = float(xi @ fit.beta_hat + score.u_hat @ (data.x.T @ resid) / data.n)
    return DebiasedEstimate(mu_tilde=mu, variance_proxy=score.objective / data.n,
                            fit=fit, score=score)


def error_decomposition(data: Dataset, xi, est: DebiasedEstimate, beta, eps):
    """Both sides of mu_tilde - xi'beta = u'X'eps/n + (xi - S u)'(beta_hat - beta)."""
    xi = np.asarray(xi, dtype=float)
    u = est.score.u_hat
    lhs = est.mu_tilde - float(xi @ beta)
    gram = data.gram()
    rhs = float(u @ (data.x.T @ eps) / data.n
                + (xi - gram @ u) @ (est.fit.beta_hat - beta))
    return lhs, rhs


def split_estimate(data: Dataset, xi, sigma0: float, seed: int) -> SplitEstimate:
    """Fit a Lasso on a random half and correct with the other half."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != data.p:
        raise DimensionMismatch("xi must have length p")
    if sigma0 < 0:
        raise ConfigError("sigma0 must be nonnegative")
    if data.n < 4:
        raise DegenerateSplit(f"need at least 4 observations to split, got {data.n}")
    perm = make_rng(seed).permutation(data.n)
    dropped = None
    if data.n % 2:
        dropped = int(perm[-1])
        perm = perm[:-1]
    half = perm.size // 2
    first, second = perm[:half], perm[half:]
    x1, y1 = data.x[first], data.y[first]
    x2, y2 = data.x[second], data.y[second]
    n1, n2 = first.size, second.size

    lam = max(math.sqrt(2.05 * math.log(data.p) / n1) * sigma0, LAMBDA_FLOOR)
    fit = lasso(Dataset(x=x1, y=y1), lam)
    beta_hat = fit.beta_hat
    mu = float(xi @ beta_hat + xi @ (x2.T @ (y2 - x2 @ beta_hat)) / n2)
    diagnostics = {"lambda": lam}
    if dropped is not None:
        diagnostics["dropped_observation"] = dropped
    return SplitEstimate(mu_bar=mu, n1=n1, n2=n2, fit=fit, sigma0=float(sigma0),
                         diagnostics=diagnostics)
