"""Shared domain types, parameter-space checks and reference rates."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MiddleRegimeLoading, NonSymmetricOmega

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Observed data: design ``x`` (n x p) and response ``y`` (n)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.ndim != 2:
            raise ConfigError(f"x must be a matrix, got shape {x.shape}")
        n, p = x.shape
        if n < 2 or p < 1:
            raise ConfigError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise ConfigError(f"y has length {y.shape[0]}, expected {n}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ConfigError("non-finite entries in data")
        if np.any(np.all(x == 0.0, axis=0)):
            raise ConfigError("x has an all-zero column")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.x, axis=0)

    def gram(self) -> np.ndarray:
        """Sample covariance ``X^T X / n``."""
        return self.x.T @ self.x / self.n


@dataclass(frozen=True)
class ModelParams:
    """Ground truth (beta, Omega, sigma) plus the band constants M1, M2."""

    beta: np.ndarray
    omega: np.ndarray
    sigma: float
    m1: float = 10.0
    m2: float = 10.0

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        omega = np.asarray(self.omega, dtype=float)
        if omega.shape != (beta.size, beta.size):
            raise ConfigError(f"omega shape {omega.shape} does not match p={beta.size}")
        if not np.all(np.isfinite(beta)):
            raise ConfigError("beta has non-finite entries")
        if self.m1 <= 1 or self.m2 <= 0:
            raise ConfigError("need m1 > 1 and m2 > 0")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "omega", omega)

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.beta))


class LoadingRegime(str, enum.Enum):
    SPARSE = "Sparse"
    DENSE = "Dense"


@dataclass(frozen=True)
class Loading:
    xi: np.ndarray
    regime: LoadingRegime
    q: int
    cbar: float


class IntervalRegime(str, enum.Enum):
    SPARSE_LOADING = "SparseLoading"
    DENSE_LOADING = "DenseLoading"
    KNOWN_DESIGN = "KnownDesign"


@dataclass(frozen=True)
class IntervalResult:
    lower: float
    upper: float
    center: float
    radius: float
    regime: IntervalRegime
    sigma_hat: float
    event_a: bool
    degenerate: bool
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def centered(cls, center, radius, regime, sigma_hat, event_a=True, diagnostics=None):
        center = float(center)
        radius = float(radius)
        return cls(
            lower=center - radius,
            upper=center + radius,
            center=center,
            radius=radius,
            regime=IntervalRegime(regime),
            sigma_hat=float(sigma_hat),
            event_a=event_a,
            degenerate=False,
            diagnostics=dict(diagnostics or {}),
        )

    @classmethod
    def collapsed(cls, regime, sigma_hat, diagnostics=None):
        """The ``{0}`` interval returned off the event ``sigma_hat <= ln p``."""
        return cls(0.0, 0.0, 0.0, 0.0, IntervalRegime(regime), float(sigma_hat),
                   event_a=False, degenerate=True, diagnostics=dict(diagnostics or {}))

    @property
    def length(self) -> float:
        return 0.0 if self.degenerate else 2.0 * self.radius

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "center": self.center,
            "radius": self.radius,
            "regime": self.regime.value,
            "sigma_hat": self.sigma_hat,
            "event_a": self.event_a,
            "degenerate": self.degenerate,
            "diagnostics": dict(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntervalResult":
        return cls(
            lower=float(d["lower"]),
            upper=float(d["upper"]),
            center=float(d["center"]),
            radius=float(d["radius"]),
            regime=IntervalRegime(d["regime"]),
            sigma_hat=float(d["sigma_hat"]),
            event_a=bool(d["event_a"]),
            degenerate=bool(d["degenerate"]),
            diagnostics=dict(d.get("diagnostics", {})),
        )


class RateRegime(str, enum.Enum):
    SPARSE_UNKNOWN = "SparseUnknown"
    DENSE_UNKNOWN = "DenseUnknown"
    SPARSE_KNOWN_IDENTITY = "SparseKnownIdentity"
    DENSE_KNOWN_ADAPTIVITY = "DenseKnownAdaptivity"


@dataclass(frozen=True)
class RateQuery:
    """Inputs of a reference rate.

    ``log_p`` overrides ``ln(p)`` so rates can be evaluated at dimensions too
    large to hold as integers.
    """

    regime: RateRegime
    n: int
    p: int
    k: int
    k1: int = 0
    xi_l2: float = 1.0
    xi_linf: float = 1.0
    sigma0: float = 1.0
    log_p: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "regime", RateRegime(self.regime))
        if self.n < 1 or self.p < 1 or self.k < 0 or self.k1 < 0:
            raise ConfigError("n, p must be positive and k, k1 nonnegative")
        if self.k > self.p or self.k1 > self.k:
            raise ConfigError("need k1 <= k <= p")
        if self.xi_l2 < 0 or self.xi_linf < 0 or self.sigma0 <= 0:
            raise ConfigError("bad norms or sigma0")

    @property
    def lnp(self) -> float:
        return math.log(self.p) if self.log_p is None else float(self.log_p)


def check_theta_membership(params: ModelParams, k: int) -> tuple[bool, list[str]]:
    """Is ``params`` in the k-sparse parameter space? Returns (ok, violations)."""
    omega = params.omega
    scale = max(1.0, float(np.max(np.abs(omega))))
    if np.max(np.abs(omega - omega.T)) > SYMMETRY_RTOL * scale:
        raise NonSymmetricOmega("omega is not symmetric")
    violations = []
    if params.sparsity > k:
        violations.append("sparsity")
    eig = np.linalg.eigvalsh((omega + omega.T) / 2)
    if eig[0] < 1.0 / params.m1 or eig[-1] > params.m1:
        violations.append("eigenvalue band")
    if not (0 < params.sigma <= params.m2):
        violations.append("noise level")
    return not violations, violations


def classify_loading(xi, p: int, k: int, gamma: float = 0.0, capital_c: float = 1.0,
                     c_dense: float = 1.0) -> Loading:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != p:
        raise ConfigError(f"xi has length {xi.size}, expected {p}")
    if not np.any(xi != 0):
        raise ConfigError("xi must be nonzero")
    if not 0 <= gamma < 0.5:
        raise ConfigError("gamma must lie in [0, 1/2)")
    mags = np.abs(xi[xi != 0])
    q = int(mags.size)
    cbar = float(mags.max() / mags.min())
    if q <= capital_c * k:
        regime = LoadingRegime.SPARSE
    elif q >= c_dense * p ** (2 * gamma):
        regime = LoadingRegime.DENSE
    else:
        raise MiddleRegimeLoading(
            f"q={q} is above {capital_c}*k={capital_c * k} but below "
            f"{c_dense}*p^(2*gamma)={c_dense * p ** (2 * gamma):.4g}"
        )
    return Loading(xi=xi, regime=regime, q=q, cbar=cbar)


def reference_rate(qy: RateQuery) -> float:
    """Minimax length rate with constant 1 (natural logs)."""
    n, k, k1, lnp = qy.n, qy.k, qy.k1, qy.lnp
    if qy.regime is RateRegime.SPARSE_UNKNOWN:
        return qy.xi_l2 * (1 / math.sqrt(n) + k * lnp / n)
    if qy.regime is RateRegime.DENSE_UNKNOWN:
        return qy.xi_linf * k * math.sqrt(lnp / n)
    if qy.regime is RateRegime.SPARSE_KNOWN_IDENTITY:
        return qy.xi_l2 / math.sqrt(n)
    root = math.sqrt(lnp / n)
    return qy.xi_linf * qy.sigma0 * max(
        math.sqrt(k * k1) * root, min(k * root, math.sqrt(k) / n ** 0.25)
    )
