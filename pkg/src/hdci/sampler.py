"""Seeded Gaussian-design regression instances and the normal quantile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, ModelParams
from .errors import ConfigError, NotSPD, OutOfRange

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer (Steele, Lea & Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Mix a base seed with stream indices into an independent 64-bit seed."""
    h = splitmix64(int(base_seed) & MASK64)
    for i in indices:
        h = splitmix64(h ^ (int(i) & MASK64))
    return h


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


# Acklam's rational approximation to the normal quantile, |rel err| < 1.15e-9.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _ppf_lower_half(q: float) -> float:
    if q < _P_LOW:
        r = math.sqrt(-2.0 * math.log(q))
        x = (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / (
            (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0)
    else:
        s = q - 0.5
        r = s * s
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    # one Newton step on Phi(x) = q
    err = _normal_cdf(x) - q
    return x - err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)


def gaussian_quantile(u: float) -> float:
    """Upper quantile: the z with P(N(0,1) > z) = u."""
    u = float(u)
    if not 0.0 < u < 1.0:
        raise OutOfRange(f"u must lie in (0, 1), got {u}")
    if u == 0.5:
        return 0.0
    if u < 0.5:
        return -_ppf_lower_half(u)
    return _ppf_lower_half(1.0 - u)


@dataclass(frozen=True)
class Covariance:
    """Design covariance: ``identity``, ``ar1`` (with ``rho``) or ``explicit``."""

    kind: str = "identity"
    rho: float = 0.0
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "ar1", "explicit"):
            raise ConfigError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "ar1" and not -1.0 < self.rho < 1.0:
            raise ConfigError("AR1 rho must lie in (-1, 1)")
        if self.kind == "explicit":
            if self.matrix is None:
                raise ConfigError("explicit covariance needs a matrix")
            object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))

    def matrix_for(self, p: int) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(p)
        if self.kind == "ar1":
            idx = np.arange(p)
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        if self.matrix.shape != (p, p):
            raise ConfigError(f"covariance shape {self.matrix.shape} != ({p}, {p})")
        return self.matrix

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "ar1":
            d["rho"] = self.rho
        if self.kind == "explicit":
            d["matrix"] = self.matrix.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Covariance":
        return cls(kind=d.get("kind", "identity"), rho=float(d.get("rho", 0.0)),
                   matrix=d.get("matrix"))


@dataclass(frozen=True)
class BetaSpec:
    """``explicit`` coefficients, or ``random_support`` with k entries of +-magnitude."""

    kind: str = "random_support"
    k: int = 0
    magnitude: float = 1.0
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("explicit", "random_support"):
            raise ConfigError(f"unknown beta spec {self.kind!r}")
        if self.kind == "explicit":
            if self.values is None:
                raise ConfigError("explicit beta needs values")
            object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(-1))
        elif self.k < 0:
            raise ConfigError("k must be nonnegative")

    def to_dict(self) -> dict:
        if self.kind == "explicit":
            return {"kind": "explicit", "values": self.values.tolist()}
        return {"kind": "random_support", "k": self.k, "magnitude": self.magnitude}

    @classmethod
    def from_dict(cls, d: dict) -> "BetaSpec":
        return cls(kind=d.get("kind", "random_support"), k=int(d.get("k", 0)),
                   magnitude=float(d.get("magnitude", 1.0)), values=d.get("values"))


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    n: int
    p: int
    covariance: Covariance = field(default_factory=Covariance)
    beta: BetaSpec = field(default_factory=BetaSpec)
    sigma: float = 1.0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ConfigError("need n >= 2 and p >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.beta.kind == "random_support" and self.beta.k > self.p:
            raise ConfigError("random support k exceeds p")
        if self.beta.kind == "explicit" and self.beta.values.size != self.p:
            raise ConfigError("explicit beta has wrong length")
        if not 0 <= int(self.seed) <= MASK64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "SamplerConfig":
        d = {f: getattr(self, f) for f in ("seed", "n", "p", "covariance", "beta", "sigma")}
        d.update(changes)
        return SamplerConfig(**d)

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "n": self.n,
            "p": self.p,
            "covariance": self.covariance.to_dict(),
            "beta": self.beta.to_dict(),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(
            seed=int(d.get("seed", 0)),
            n=int(d["n"]),
            p=int(d["p"]),
            covariance=Covariance.from_dict(d.get("covariance", {})),
            beta=BetaSpec.from_dict(d.get("beta", {})),
            sigma=float(d.get("sigma", 1.0)),
        )


def _cholesky_factor(cov: np.ndarray) -> np.ndarray:
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise NotSPD("covariance is not symmetric")
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotSPD("covariance is not positive definite") from exc
    if np.linalg.eigvalsh(cov)[0] <= 0:
        raise NotSPD("covariance is not positive definite")
    return factor


def sample_instance(cfg: SamplerConfig) -> tuple[Dataset, ModelParams]:
    """Draw (X, y) with rows of X ~ N(0, Sigma) and y = X beta + sigma * eps.

    Draw order from one Philox stream: support permutation (random support
    only), the n x p standard normals, then the n noise draws.
    """
    rng = make_rng(cfg.seed)
    n, p = cfg.n, cfg.p
    cov = cfg.covariance.matrix_for(p)
    factor = _cholesky_factor(cov)

    if cfg.beta.kind == "explicit":
        beta = cfg.beta.values.copy()
    else:
        beta = np.zeros(p)
        support = rng.permutation(p)[: cfg.beta.k]
        signs = np.where(np.arange(cfg.beta.k) % 2 == 0, 1.0, -1.0)
        beta[support] = cfg.beta.magnitude * signs

    z = rng.standard_normal((n, p))
    x = z if cfg.covariance.kind == "identity" else z @ factor.T
    eps = rng.standard_normal(n)
    y = x @ beta + cfg.sigma * eps

    omega = np.linalg.inv(cov) if cfg.covariance.kind != "identity" else np.eye(p)
    omega = (omega + omega.T) / 2
    eig = np.linalg.eigvalsh(omega)
    m1 = max(1.0 + 1e-9, float(eig[-1]), float(1.0 / eig[0]))
    params = ModelParams(beta=beta, omega=omega, sigma=cfg.sigma, m1=m1,
                         m2=max(cfg.sigma, 1e-300))
    return Dataset(x=x, y=y), params
