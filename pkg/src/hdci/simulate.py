"""Monte Carlo coverage harness.

Every replicate draws its own instance from a seed mixed out of
``(base_seed, cell, replicate)``, so results depend only on the config and
never on scheduling. Replicates run in a thread pool (the numerical kernels
release the GIL) and are reduced in index order.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .errors import ConfigError, HdciError
from .intervals import CIConfig, ci_dense, ci_known_design, ci_sparse
from .sampler import (BetaSpec, Covariance, SamplerConfig, derive_seed, gaussian_quantile,
                      sample_instance)

SCHEMA_VERSION = 1
INTERVALS = ("sparse", "dense", "known_design")
SWEEPABLE = ("k", "n", "p")
CSV_HEADER = ("swept_value", "coverage", "cov_lo", "cov_hi", "mean_length",
              "median_length", "degenerate_fraction", "failure_fraction")


@dataclass(frozen=True)
class XiSpec:
    """``coordinate`` (e_index), ``all_ones``, or ``explicit_file`` (one value per line)."""

    kind: str = "coordinate"
    index: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("coordinate", "all_ones", "explicit_file"):
            raise ConfigError(f"unknown xi spec {self.kind!r}")
        if self.kind == "explicit_file" and not self.path:
            raise ConfigError("explicit_file xi needs a path")
        if self.index < 0:
            raise ConfigError("xi index must be nonnegative")

    def vector(self, p: int) -> np.ndarray:
        if self.kind == "coordinate":
            if self.index >= p:
                raise ConfigError(f"xi index {self.index} out of range for p={p}")
            xi = np.zeros(p)
            xi[self.index] = 1.0
            return xi
        if self.kind == "all_ones":
            return np.ones(p)
        xi = np.loadtxt(self.path, delimiter=",", ndmin=1, dtype=float).reshape(-1)
        if xi.size != p:
            raise ConfigError(f"xi file has {xi.size} entries, expected {p}")
        return xi

    def to_dict(self) -> dict:
        if self.kind == "coordinate":
            return {"kind": "coordinate", "index": self.index}
        if self.kind == "all_ones":
            return {"kind": "all_ones"}
        return {"kind": "explicit_file", "path": self.path}

    @classmethod
    def from_dict(cls, d: dict) -> "XiSpec":
        return cls(kind=d.get("kind", "coordinate"), index=int(d.get("index", 0)),
                   path=d.get("path"))


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {self.parameter!r}")
        vals = tuple(int(v) for v in self.values)
        if not vals:
            raise ConfigError("sweep needs at least one value")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "values": list(self.values)}


@dataclass(frozen=True)
class ExperimentConfig:
    sampler: SamplerConfig
    ci: CIConfig = field(default_factory=CIConfig)
    interval: str = "sparse"
    xi: XiSpec = field(default_factory=XiSpec)
    replicates: int = 100
    base_seed: int = 0
    sweep: Sweep | None = None
    max_failure_fraction: float = 0.05

    def __post_init__(self):
        if self.interval not in INTERVALS:
            raise ConfigError(f"interval must be one of {INTERVALS}")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ConfigError("base_seed must be a 64-bit unsigned integer")
        if not 0 <= self.max_failure_fraction <= 1:
            raise ConfigError("max_failure_fraction must lie in [0, 1]")

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ExperimentConfig(**d)

    def cells(self) -> list[tuple[int | None, SamplerConfig, CIConfig]]:
        """(swept value, sampler, ci) for every cell; a k sweep moves both the truth and the CI."""
        if self.sweep is None:
            return [(None, self.sampler, self.ci)]
        out = []
        for v in self.sweep.values:
            s, c = self.sampler, self.ci
            if self.sweep.parameter == "k":
                c = c.replace(k=v)
                if s.beta.kind == "random_support":
                    s = s.replace(beta=BetaSpec(kind="random_support", k=v,
                                                magnitude=s.beta.magnitude))
            else:
                s = s.replace(**{self.sweep.parameter: v})
            out.append((v, s, c))
        return out

    def to_dict(self) -> dict:
        return {
            "sampler": self.sampler.to_dict(),
            "ci": self.ci.to_dict(),
            "interval": self.interval,
            "xi": self.xi.to_dict(),
            "replicates": self.replicates,
            "base_seed": int(self.base_seed),
            "sweep": self.sweep.to_dict() if self.sweep else None,
            "max_failure_fraction": self.max_failure_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"sampler", "ci", "interval", "xi", "replicates", "base_seed", "sweep",
                 "max_failure_fraction", "schema_version"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if "sampler" not in d:
            raise ConfigError("experiment config needs a sampler section")
        sweep = d.get("sweep")
        return cls(
            sampler=SamplerConfig.from_dict(d["sampler"]),
            ci=CIConfig.from_dict(d.get("ci", {})),
            interval=d.get("interval", "sparse"),
            xi=XiSpec.from_dict(d.get("xi", {})),
            replicates=int(d.get("replicates", 100)),
            base_seed=int(d.get("base_seed", 0)),
            sweep=Sweep(sweep["parameter"], sweep["values"]) if sweep else None,
            max_failure_fraction=float(d.get("max_failure_fraction", 0.05)),
        )


@dataclass(frozen=True)
class ReplicateRecord:
    seed: int
    truth: float
    lower: float
    upper: float
    length: float
    covered: bool
    degenerate: bool
    branch: float
    sigma_hat: float = 0.0
    failure: str | None = None

    def to_dict(self) -> dict:
        return {"seed": self.seed, "truth": self.truth, "lower": self.lower,
                "upper": self.upper, "length": self.length, "covered": self.covered,
                "degenerate": self.degenerate, "branch": self.branch,
                "sigma_hat": self.sigma_hat, "failure": self.failure}


@dataclass(frozen=True)
class CellSummary:
    swept_value: int | None
    replicates: int
    evaluated: int
    covered: int
    coverage: float
    wilson_interval: tuple
    mean_length: float
    median_length: float
    degenerate_fraction: float
    branch1_fraction: float
    failure_fraction: float
    failures_excluded: bool
    records: list

    def to_dict(self) -> dict:
        return {
            "swept_value": self.swept_value,
            "replicates": self.replicates,
            "evaluated": self.evaluated,
            "covered": self.covered,
            "empirical_coverage": self.coverage,
            "wilson_interval": list(self.wilson_interval),
            "mean_length": self.mean_length,
            "median_length": self.median_length,
            "degenerate_fraction": self.degenerate_fraction,
            "branch1_fraction": self.branch1_fraction,
            "failure_fraction": self.failure_fraction,
            "failures_excluded": self.failures_excluded,
            "records": [r.to_dict() for r in self.records],
        }


@dataclass(frozen=True)
class CoverageReport:
    config: ExperimentConfig
    cells: list
    runtime_seconds: float = 0.0
    fit: dict | None = None

    @property
    def max_failure_fraction(self) -> float:
        return max(c.failure_fraction for c in self.cells)

    def to_dict(self) -> dict:
        import numba
        import scipy

        out = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "per_cell": [c.to_dict() for c in self.cells],
            "versions": {"hdci": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "numba": numba.__version__},
        }
        if self.fit is not None:
            out["fit"] = dict(self.fit)
        return out

    def to_json(self) -> str:
        """Canonical JSON. Wall-clock time is left out so reruns compare byte for byte."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def csv_rows(self) -> list[list]:
        rows = []
        for c in self.cells:
            rows.append([c.swept_value if c.swept_value is not None else "", c.coverage,
                         c.wilson_interval[0], c.wilson_interval[1], c.mean_length,
                         c.median_length, c.degenerate_fraction, c.failure_fraction])
        return rows

    def write(self, out_dir: str) -> dict:
        """Write report.json, cells.csv and the timing sidecar; returns their paths."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {name: os.path.join(out_dir, name)
                 for name in ("report.json", "cells.csv", "timing.json")}
        with open(paths["report.json"], "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        with open(paths["cells.csv"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows([[_fmt(v) for v in row] for row in self.csv_rows()])
        with open(paths["timing.json"], "w", encoding="utf-8") as fh:
            json.dump({"runtime_seconds": self.runtime_seconds}, fh)
            fh.write("\n")
        return paths


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; (0, 1) when there are no trials."""
    if trials <= 0:
        return (0.0, 1.0)
    if not 0 <= successes <= trials:
        raise ConfigError("successes must lie in [0, trials]")
    z = gaussian_quantile(alpha / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    lo = max(0.0, centre - half)
    hi = min(1.0, centre + half)
    # guard the containment invariant against rounding at the extremes
    return (min(lo, phat), max(hi, phat))


def shifted_mean(values) -> float:
    """Mean computed around the first value: exact when all values are equal."""
    if not len(values):
        return 0.0
    x0 = float(values[0])
    return x0 + math.fsum(float(v) - x0 for v in values) / len(values)


def _build_interval(kind: str, data, xi, sigma0: float, ci: CIConfig, seed: int):
    if kind == "sparse":
        return ci_sparse(data, xi, ci)
    if kind == "dense":
        return ci_dense(data, xi, ci)
    return ci_known_design(data, xi, sigma0, ci, seed=derive_seed(seed, 1))


def run_replicate(kind: str, sampler: SamplerConfig, ci: CIConfig, xi: np.ndarray,
                  seed: int) -> ReplicateRecord:
    data, params = sample_instance(sampler.replace(seed=seed))
    truth = float(xi @ params.beta)
    try:
        res = _build_interval(kind, data, xi, sampler.sigma, ci, seed)
    except HdciError as exc:
        return ReplicateRecord(seed=seed, truth=truth, lower=0.0, upper=0.0, length=0.0,
                               covered=False, degenerate=False, branch=0.0,
                               failure=type(exc).__name__)
    return ReplicateRecord(seed=seed, truth=truth, lower=res.lower, upper=res.upper,
                           length=res.length, covered=res.covers(truth),
                           degenerate=res.degenerate,
                           branch=float(res.diagnostics.get("branch", 0.0)),
                           sigma_hat=res.sigma_hat)


def summarize_cell(swept_value, records: list, alpha: float = 0.05) -> CellSummary:
    ok = [r for r in records if r.failure is None]
    covered = sum(r.covered for r in ok)
    lengths = [r.length for r in ok]
    nrep = len(records)
    nev = len(ok)
    return CellSummary(
        swept_value=swept_value,
        replicates=nrep,
        evaluated=nev,
        covered=covered,
        coverage=covered / nev if nev else 0.0,
        wilson_interval=wilson_interval(covered, nev, alpha),
        mean_length=shifted_mean(lengths),
        median_length=float(np.median(lengths)) if lengths else 0.0,
        degenerate_fraction=sum(r.degenerate for r in ok) / nev if nev else 0.0,
        branch1_fraction=sum(r.branch == 1.0 for r in ok) / nev if nev else 0.0,
        failure_fraction=(nrep - nev) / nrep,
        failures_excluded=nev < nrep,
        records=list(records),
    )


def default_threads() -> int:
    return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> CoverageReport:
    import time

    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    start = time.perf_counter()
    cells = cfg.cells()
    tasks = []
    for ci_idx, (_, sampler, ci) in enumerate(cells):
        xi = cfg.xi.vector(sampler.p)
        for r in range(cfg.replicates):
            tasks.append((cfg.interval, sampler, ci, xi, derive_seed(cfg.base_seed, ci_idx, r)))

    if threads == 1:
        records = [run_replicate(*t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda t: run_replicate(*t), tasks))

    summaries = []
    for ci_idx, (value, _, ci) in enumerate(cells):
        chunk = records[ci_idx * cfg.replicates:(ci_idx + 1) * cfg.replicates]
        summaries.append(summarize_cell(value, chunk))
    return CoverageReport(config=cfg, cells=summaries,
                          runtime_seconds=time.perf_counter() - start)


def affine_fit(x, y) -> dict:
    """Least-squares line through (x, y) with R^2.

    The response is centred on its first value before fitting, so a constant
    response yields slope 0.0 exactly; R^2 is 1 for a constant response.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ConfigError("need at least two points to fit a line")
    y0 = float(y[0])
    yc = y - y0
    xbar = math.fsum(x.tolist()) / x.size
    ybar = math.fsum(yc.tolist()) / x.size
    dx = x - xbar
    dy = yc - ybar
    sxx = math.fsum((dx * dx).tolist())
    slope = math.fsum((dx * dy).tolist()) / sxx
    intercept = y0 + ybar - slope * xbar
    resid = dy - slope * dx
    ss_tot = math.fsum((dy * dy).tolist())
    ss_res = math.fsum((resid * resid).tolist())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return {"slope": slope, "intercept": intercept, "r_squared": r2}


def rate_sweep_report(cfg: ExperimentConfig, threads: int | None = None) -> CoverageReport:
    """run_experiment over a k sweep plus an affine fit of mean length against k."""
    if cfg.sweep is None or cfg.sweep.parameter != "k":
        raise ConfigError("rate sweep needs a sweep over k")
    if len(cfg.sweep.values) < 2:
        raise ConfigError("rate sweep needs at least two k values")
    rep = run_experiment(cfg, threads)
    fit = affine_fit([c.swept_value for c in rep.cells], [c.mean_length for c in rep.cells])
    return CoverageReport(config=rep.config, cells=rep.cells,
                          runtime_seconds=rep.runtime_seconds, fit=fit)


@dataclass(frozen=True)
class NonAdaptivityReport:
    small: CellSummary
    large: CellSummary
    config_small: ExperimentConfig
    config_large: ExperimentConfig
    settings: dict = field(default_factory=dict)

    @property
    def deficit(self) -> float:
        return self.small.coverage - self.large.coverage

    @property
    def significant(self) -> bool:
        """True when the two Wilson intervals are disjoint with the large-k one below."""
        return self.large.wilson_interval[1] < self.small.wilson_interval[0]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "coverage_at_k_small": self.small.coverage,
            "coverage_at_k_large": self.large.coverage,
            "wilson_at_k_small": list(self.small.wilson_interval),
            "wilson_at_k_large": list(self.large.wilson_interval),
            "deficit": self.deficit,
            "significant": self.significant,
            "settings": dict(self.settings),
        }


@dataclass(frozen=True)
class SpikeTruth:
    """A correlated-design truth whose data law sits close to the beta = 0 null."""

    covariance: np.ndarray
    beta: np.ndarray
    noise_sd: float
    rho: float
    target: float


def spike_truth(n: int, p: int, k: int, sigma: float = 1.0,
                magnitude: float | None = None) -> SpikeTruth:
    """Truth of sparsity k built from m = k - 1 spikes correlated with coordinate 0.

    The design covariance is I plus rho on the (0, j) entries for the spike
    coordinates j = 1..m. With d2 = m rho^2 the coefficients are
    beta_0 = -sigma d2 / (1 - d2) and beta_j = (sigma - beta_0) rho, and the noise
    variance is sigma^2 (1 - d2 / (1 - d2)), so y keeps the null's joint law
    with x_0 apart from the spike correlations. rho solves beta_j = magnitude,
    which defaults to sigma sqrt(ln p / n).
    """
    if not 1 <= k <= p:
        raise ConfigError("need 1 <= k <= p")
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    if magnitude is None:
        magnitude = sigma * math.sqrt(math.log(p) / n)
    m = k - 1
    cov = np.eye(p)
    beta = np.zeros(p)
    if m == 0:
        return SpikeTruth(cov, beta, float(sigma), 0.0, 0.0)
    # beta_j = sigma rho / (1 - m rho^2) increases on [0, 1/sqrt(2m)) and the
    # noise variance stays positive there (d2 < 1/2)
    hi = 1.0 / math.sqrt(2.0 * m)
    if sigma * hi / (1 - m * hi * hi) <= magnitude:
        raise ConfigError("spike magnitude too large for a valid truth")
    rho = brentq(lambda r: sigma * r / (1 - m * r * r) - magnitude, 0.0, hi, xtol=1e-15)
    d2 = m * rho * rho
    target = -sigma * d2 / (1 - d2)
    cov[0, 1:m + 1] = rho
    cov[1:m + 1, 0] = rho
    beta[0] = target
    beta[1:m + 1] = (sigma - target) * rho
    noise_sd = sigma * math.sqrt(1 - d2 / (1 - d2))
    return SpikeTruth(cov, beta, noise_sd, rho, target)


def nonadaptivity_demo(n: int, p: int, k_small: int, k_large: int, alpha: float = 0.05,
                       replicates: int = 200, seed: int = 0, *, sigma: float = 1.0,
                       magnitude: float | None = None,
                       threads: int | None = None) -> NonAdaptivityReport:
    """Coverage of the interval tuned for k_small, at k_small and at k_large truths.

    The interval is the de-biased one in oracle-normality mode with cfg.k = k_small,
    for the functional e_0'beta. Truths come from ``spike_truth``: the signal mass
    of the larger truth is spread over k - 1 weak coordinates tied to coordinate 0
    through the design.
    """
    if not 1 <= k_small <= k_large <= p:
        raise ConfigError("need 1 <= k_small <= k_large <= p")
    ci = CIConfig(alpha=alpha, k=k_small, mode="oracle-normality", auto_escalate=True)

    truths = {}

    def config(k, base):
        t = spike_truth(n, p, k, sigma, magnitude)
        truths[k] = {"k": k, "rho": t.rho, "target": t.target, "noise_sd": t.noise_sd}
        sampler = SamplerConfig(seed=0, n=n, p=p, sigma=t.noise_sd,
                                covariance=Covariance(kind="explicit", matrix=t.covariance),
                                beta=BetaSpec(kind="explicit", values=t.beta))
        return ExperimentConfig(sampler=sampler, ci=ci, interval="sparse",
                                replicates=replicates, base_seed=base)

    # distinct base seeds keep the two arms independent
    cs = config(k_small, seed)
    cl = config(k_large, derive_seed(seed, k_large))
    small = run_experiment(cs, threads).cells[0]
    large = run_experiment(cl, threads).cells[0]
    settings = {"n": n, "p": p, "k_small": k_small, "k_large": k_large, "alpha": alpha,
                "replicates": replicates, "seed": int(seed), "sigma": sigma,
                "truth_small": truths[k_small], "truth_large": truths[k_large]}
    return NonAdaptivityReport(small=small, large=large, config_small=cs, config_large=cl,
                               settings=settings)
