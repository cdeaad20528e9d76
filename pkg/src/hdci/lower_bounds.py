"""Two-point lower-bound calculator.

The null hypothesis is a single parameter and the alternative a uniform
mixture over spikes: vectors with exactly m entries equal to rho among p1
free coordinates. Two independent draws overlap in J ~ Hypergeometric(p1, m, m)
coordinates, which turns the chi-square distance into a finite sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DivergentChiSq, GapDiverges


@dataclass(frozen=True)
class TwoPointProblem:
    mu0: float
    mu1: float
    alpha: float
    tv: float

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ConfigError("alpha must lie in (0, 1/2)")
        if not 0 <= self.tv <= 2:
            raise ConfigError("tv must lie in [0, 2]")


@dataclass(frozen=True)
class MixtureSpec:
    n: int
    p1: int
    m: int
    rho: float
    sigma: float = 1.0
    psi1_star: float = 0.0
    rho0: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.p1 < 1 or self.m < 1:
            raise ConfigError("n, p1 and m must be positive")
        if self.m > self.p1:
            raise ConfigError(f"m={self.m} exceeds p1={self.p1}")
        if self.rho < 0 or not math.isfinite(self.rho):
            raise ConfigError("rho must be finite and nonnegative")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        # offset rho0 - psi1*, kept exact for the default rho0 = psi1* + sigma
        offset = self.sigma if self.rho0 is None else self.rho0 - self.psi1_star
        object.__setattr__(self, "_offset", offset)
        if self.rho0 is None:
            object.__setattr__(self, "rho0", self.psi1_star + self.sigma)

    @property
    def multiplier(self) -> float:
        """c = (rho0 (rho0 - psi1*) + f1) / sigma^2 with f1 = sigma^2 + psi1*^2 - rho0 psi1*.

        The numerator equals (rho0 - psi1*)^2 + sigma^2, evaluated in that form
        to avoid cancellation when |psi1*| is large.
        """
        s2 = self.sigma ** 2
        return (self._offset ** 2 + s2) / s2


def two_point_length_bound(tp: TwoPointProblem) -> float:
    """|mu1 - mu0| * (1 - 2 alpha - TV)_+."""
    return abs(tp.mu1 - tp.mu0) * max(0.0, 1.0 - 2.0 * tp.alpha - tp.tv)


def hypergeom_logpmf(p: int, k: int) -> np.ndarray:
    """log P(J = j), j = 0..k, for the overlap of two uniform k-subsets of p items."""
    j = np.arange(k + 1, dtype=float)

    def lchoose(a, b):
        return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)

    with np.errstate(invalid="ignore"):
        out = lchoose(k, j) + lchoose(p - k, k - j) - lchoose(p, k)
    # overlaps that need more than p - k outside draws are impossible
    out[(k - j) > (p - k)] = -np.inf
    return out


def chisq_mixture(spec: MixtureSpec) -> float:
    """Exact chi-square distance between the spike mixture and the null."""
    c = spec.multiplier
    r2 = spec.rho ** 2
    if c * spec.m * r2 >= 1:
        raise DivergentChiSq(f"c*m*rho^2 = {c * spec.m * r2:.6g} >= 1")
    if r2 == 0:
        return 0.0
    logpmf = hypergeom_logpmf(spec.p1, spec.m)
    j = np.arange(spec.m + 1)
    # (1 - c rho^2 j)^(-n) - 1, kept accurate when the overlap term is tiny
    terms = np.expm1(-spec.n * np.log1p(-c * r2 * j))
    weights = np.exp(logpmf)
    return max(0.0, math.fsum((weights * terms).tolist()))


def tv_upper_from_chisq(chisq: float) -> float:
    if chisq < 0:
        raise ConfigError("chi-square must be nonnegative")
    return math.sqrt(chisq)


def hypergeom_mgf_bound_check(p: int, k: int, t: float) -> tuple[float, float]:
    """Exact E exp(tJ) by enumeration and the bound e^{k^2/(p-k)} (1 - k/p + k e^t / p)^k."""
    if not 1 <= k < p:
        raise ConfigError("need 1 <= k < p")
    if not math.isfinite(t):
        raise ConfigError("t must be finite")
    logpmf = hypergeom_logpmf(p, k)
    j = np.arange(k + 1)
    exact = math.fsum(np.exp(logpmf + t * j).tolist())
    bound = math.exp(k * k / (p - k)) * (1 - k / p + k / p * math.exp(t)) ** k
    return exact, bound


def separation_gap(spec: MixtureSpec) -> float:
    """sigma m rho^2 / (1 - m rho^2): distance between the two functional values."""
    d2 = spec.m * spec.rho ** 2
    if d2 >= 1:
        raise GapDiverges(f"m*rho^2 = {d2:.6g} >= 1")
    return spec.sigma * d2 / (1 - d2)


def spike_count(k: int, zeta0: float) -> int:
    return max(1, int(math.floor(zeta0 * k / 2)))


def spike_magnitude(n: int, p1: int, k: int, zeta0: float) -> float:
    """rho = sqrt(ln(4 p1 / (zeta0^2 k^2)) / (8 n)), floored at 0."""
    arg = 4 * p1 / (zeta0 ** 2 * k ** 2)
    return math.sqrt(max(0.0, math.log(arg)) / (8 * n))


def adaptivity_spec(n: int, p: int, k: int, k1: int = 0, zeta0: float = 0.5,
                    sigma: float = 1.0, psi1_star: float = 0.0) -> MixtureSpec:
    if not 1 <= k <= p:
        raise ConfigError("need 1 <= k <= p")
    if not 0 <= k1 <= k:
        raise ConfigError("need 0 <= k1 <= k")
    if zeta0 <= 0:
        raise ConfigError("zeta0 must be positive")
    p1 = p - k1 - 1
    if p1 < 1:
        raise ConfigError("no free coordinates left for the mixture")
    m = spike_count(k, zeta0)
    return MixtureSpec(n=n, p1=p1, m=min(m, p1), rho=spike_magnitude(n, p1, k, zeta0),
                       sigma=sigma, psi1_star=psi1_star)


def adaptivity_lower_curve(n: int, p: int, k: int, k1: int = 0, alpha: float = 0.05,
                           zeta0: float = 0.5, sigma: float = 1.0) -> float:
    """Expected-length lower bound from the spike mixture at sparsity k."""
    if not 0 < alpha < 0.5:
        raise ConfigError("alpha must lie in (0, 1/2)")
    spec = adaptivity_spec(n, p, k, k1, zeta0, sigma)
    tv = min(2.0, tv_upper_from_chisq(chisq_mixture(spec)))
    gap = separation_gap(spec)
    return two_point_length_bound(TwoPointProblem(mu0=0.0, mu1=gap, alpha=alpha, tv=tv))
