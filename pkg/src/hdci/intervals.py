"""The three interval families: sparse loading, dense loading and known design."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .certificates import (PAPER_CONSTANTS, Constants, c1_constant, c2_constant,
                           omega_surrogate)
from .core import Dataset, IntervalRegime, IntervalResult
from .debias import debiased_estimate, default_lambda_n, solve_score, split_estimate
from .errors import ConfigError
from .estimators import scaled_lasso
from .sampler import gaussian_quantile

SLACK = 1.01


class Mode(str, enum.Enum):
    FAITHFUL = "faithful"
    RESCALED = "rescaled"
    ORACLE_NORMALITY = "oracle-normality"


@dataclass(frozen=True)
class CIConfig:
    """Interval settings.

    ``kappa_sq`` supplies a restricted-eigenvalue value directly; otherwise
    ``omega_eigs = (lambda_min, lambda_max)`` of the precision matrix feed the
    closed-form surrogate. With neither (or a zero surrogate) the radius falls
    back to its capped branch.

    In ``oracle-normality`` mode the bias term is dropped and, unless
    overridden, lambda_n uses ``oracle_lambda_prefactor`` in place of 12 M1^2.
    """

    alpha: float = 0.05
    k: int = 0
    m1: float = 1.5
    gamma0: float = 0.9
    mode: Mode = Mode.FAITHFUL
    constants: Constants = field(default_factory=Constants)
    lambda_n_override: float | None = None
    kappa_sq: float | None = None
    omega_eigs: tuple | None = None
    omega_plug_in: bool = True
    auto_escalate: bool = False
    oracle_lambda_prefactor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 0 < self.alpha < 0.5:
            raise ConfigError("alpha must lie in (0, 1/2)")
        if self.k < 0:
            raise ConfigError("k must be nonnegative")
        if self.m1 <= 1:
            raise ConfigError("m1 must exceed 1")
        if not 0 < self.gamma0 < 1:
            raise ConfigError("gamma0 must lie in (0, 1)")
        if self.lambda_n_override is not None and self.lambda_n_override <= 0:
            raise ConfigError("lambda_n_override must be positive")
        if self.omega_eigs is not None:
            object.__setattr__(self, "omega_eigs", tuple(float(v) for v in self.omega_eigs))

    @property
    def effective_constants(self) -> Constants:
        return self.constants if self.mode is Mode.RESCALED else PAPER_CONSTANTS

    def replace(self, **changes) -> "CIConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return CIConfig(**d)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "k": self.k,
            "m1": self.m1,
            "gamma0": self.gamma0,
            "mode": self.mode.value,
            "constants": self.constants.to_dict(),
            "lambda_n_override": self.lambda_n_override,
            "kappa_sq": self.kappa_sq,
            "omega_eigs": list(self.omega_eigs) if self.omega_eigs else None,
            "omega_plug_in": self.omega_plug_in,
            "auto_escalate": self.auto_escalate,
            "oracle_lambda_prefactor": self.oracle_lambda_prefactor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CIConfig":
        d = dict(d)
        if "constants" in d:
            d["constants"] = Constants.from_dict(d["constants"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown ci config keys: {sorted(unknown)}")
        return cls(**d)


def _kappa_sq(data: Dataset, cfg: CIConfig):
    """Resolve the restricted-eigenvalue input; None means use the capped branch."""
    if cfg.kappa_sq is not None:
        return float(cfg.kappa_sq), "supplied"
    if cfg.omega_eigs is not None:
        lo, hi = cfg.omega_eigs
        om = omega_surrogate(lo, hi, data, cfg.k, plug_in=cfg.omega_plug_in,
                             constants=cfg.effective_constants)
        if om.value > 0:
            return om.value, "omega"
    return None, "capped"


def _check_xi(data: Dataset, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != data.p:
        raise ConfigError(f"xi has length {xi.size}, expected {data.p}")
    if not np.any(xi != 0):
        raise ConfigError("xi must be nonzero")
    return xi


def ci_sparse(data: Dataset, xi, cfg: CIConfig) -> IntervalResult:
    """Interval centred at the de-biased scaled-Lasso estimate."""
    xi = _check_xi(data, xi)
    n, p, k = data.n, data.p, cfg.k
    lnp = math.log(p)
    fit = scaled_lasso(data)
    diag = {"scaled_lasso_iterations": float(fit.iterations),
            "kkt_residual": fit.kkt_residual}
    if fit.sigma_hat > lnp:
        return IntervalResult.collapsed(IntervalRegime.SPARSE_LOADING, fit.sigma_hat, diag)

    consts = cfg.effective_constants
    if cfg.lambda_n_override is not None:
        lam_n = cfg.lambda_n_override
    elif cfg.mode is Mode.ORACLE_NORMALITY:
        lam_n = default_lambda_n(xi, n, p, 1.0, cfg.oracle_lambda_prefactor)
    else:
        lam_n = default_lambda_n(xi, n, p, cfg.m1, consts.lambda_n_prefactor)
    score = solve_score(data.gram(), xi, lam_n, auto_escalate=cfg.auto_escalate)
    est = debiased_estimate(data, xi, fit, score)
    diag.update(qp_gap=score.duality_gap, qp_iterations=float(score.iterations),
                escalations=float(score.escalations), lambda_n=score.lambda_n,
                variance_proxy=est.variance_proxy)

    z = gaussian_quantile(cfg.alpha / 2)
    xi_norm = float(np.linalg.norm(xi))
    sigma_hat = fit.sigma_hat
    if cfg.mode is Mode.ORACLE_NORMALITY:
        radius = SLACK * math.sqrt(score.objective / n) * z * sigma_hat
        diag["branch"] = 1.0
    else:
        normal = SLACK * math.sqrt(score.objective / (n * xi_norm ** 2)) * z
        cap = lnp * (1 / math.sqrt(n) + k * lnp / n)
        kappa_sq, _ = _kappa_sq(data, cfg) if k > 0 else (None, "unused")
        if k == 0:
            # no bias term to bound, so no kappa is needed
            first = normal
            diag["capped"] = 0.0
        elif kappa_sq is None:
            first = math.inf
            diag["capped"] = 1.0
        else:
            c1 = c1_constant(data, k, kappa_sq, cfg.m1, consts)
            first = normal + c1 * k * lnp / n
            diag.update(capped=0.0, c1=c1, kappa_sq=kappa_sq)
        diag["branch"] = 1.0 if first <= cap else 2.0
        radius = xi_norm * sigma_hat * min(first, cap)
    return IntervalResult.centered(est.mu_tilde, radius, IntervalRegime.SPARSE_LOADING,
                                   sigma_hat, diagnostics=diag)


def ci_dense(data: Dataset, xi, cfg: CIConfig) -> IntervalResult:
    """Interval centred at the plain scaled-Lasso plug-in xi'beta_hat."""
    xi = _check_xi(data, xi)
    n, p, k = data.n, data.p, cfg.k
    lnp = math.log(p)
    fit = scaled_lasso(data)
    diag = {"scaled_lasso_iterations": float(fit.iterations),
            "kkt_residual": fit.kkt_residual}
    if fit.sigma_hat > lnp:
        return IntervalResult.collapsed(IntervalRegime.DENSE_LOADING, fit.sigma_hat, diag)

    sigma_hat = fit.sigma_hat
    base = k * math.sqrt(lnp / n) * sigma_hat
    cap = lnp * base
    kappa_sq, _ = _kappa_sq(data, cfg)
    if kappa_sq is None:
        first = math.inf
        diag["capped"] = 1.0
    else:
        c2 = c2_constant(data, k, kappa_sq, cfg.effective_constants)
        first = c2 * base
        diag.update(capped=0.0, c2=c2, kappa_sq=kappa_sq)
    diag["branch"] = 1.0 if first <= cap else 2.0
    radius = float(np.max(np.abs(xi))) * min(first, cap)
    return IntervalResult.centered(float(xi @ fit.beta_hat), radius,
                                   IntervalRegime.DENSE_LOADING, sigma_hat, diagnostics=diag)


def known_design_radius(xi, n2: int, sigma0: float, alpha: float, gamma0: float) -> float:
    """1.01 * ||xi||_2 / sqrt(n2) * z_{gamma0 alpha / 2} * sigma0."""
    z = gaussian_quantile(gamma0 * alpha / 2)
    return SLACK * float(np.linalg.norm(xi)) / math.sqrt(n2) * z * sigma0


def ci_known_design(data: Dataset, xi, sigma0: float, cfg: CIConfig,
                    seed: int = 0) -> IntervalResult:
    """Split-sample interval for a design known to be N(0, I) with noise level sigma0."""
    xi = _check_xi(data, xi)
    est = split_estimate(data, xi, sigma0, seed)
    radius = known_design_radius(xi, est.n2, sigma0, cfg.alpha, cfg.gamma0)
    diag = {"n1": float(est.n1), "n2": float(est.n2), **est.diagnostics}
    return IntervalResult.centered(est.mu_bar, radius, IntervalRegime.KNOWN_DESIGN,
                                   sigma0, diagnostics=diag)
