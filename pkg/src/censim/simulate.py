"""Data-generating processes and the Monte Carlo MSE harness.

Three designs with two covariates:

=========  ====================  ===================  ==========================  ============
config     noise                 covariates           link f(u)                   censoring C
=========  ====================  ===================  ==========================  ============
1          N(0, var 2)           U[-2,2] x U[-2,2]    u^2/2 + 1                   U[0, lam]
2          N(0, 1)               U[0,1] x U[0,1]      2 exp(u/2) / (1/2 + u)      Exp(rate lam)
3          N(0, var 1/16)        Bern(0.6) x U[-1,1]  1 + 0.1 u^2 - 0.2 (u - 1)   Exp(rate lam)
=========  ====================  ===================  ==========================  ============

with ``theta0 = (1, 1)`` in config 1 and ``(1, 2)`` otherwise.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import CensimError
from .estimate import FitConfig, fit
from .survival import CensoredSample, ContinuousCdf

__all__ = [
    "THETA0",
    "SimulationConfig",
    "DgpDraw",
    "MethodSummary",
    "MseReport",
    "dgp_sample",
    "true_censoring_cdf",
    "calibrate_censoring",
    "run_monte_carlo",
    "worker_count",
]

log = logging.getLogger(__name__)

THETA0 = {1: np.array([1.0, 1.0]), 2: np.array([1.0, 2.0]), 3: np.array([1.0, 2.0])}


def _link(config_id: int, u):
    if config_id == 1:
        return 0.5 * u**2 + 1.0
    if config_id == 2:
        return 2.0 * np.exp(0.5 * u) / (0.5 + u)
    return 1.0 + 0.1 * u**2 - 0.2 * (u - 1.0)


_NOISE_SD = {1: np.sqrt(2.0), 2: 1.0, 3: 0.25}


@dataclass(frozen=True)
class SimulationConfig:
    config_id: int
    censoring_param: float
    n: int = 100
    replications: int = 200
    seed: int = 0
    methods: tuple = ("WLS", "SD")
    bandwidth_const: float = 1.0
    trim_frac: float = 0.1
    restarts: int = 3

    def __post_init__(self):
        if self.config_id not in (1, 2, 3):
            raise ValueError(f"config_id must be 1, 2 or 3, got {self.config_id}")
        if not self.censoring_param > 0:
            raise ValueError("censoring_param must be positive")
        if self.n < 20:
            raise ValueError("n must be at least 20")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        object.__setattr__(self, "methods", tuple(m.upper() for m in self.methods))

    @property
    def theta0(self) -> np.ndarray:
        return THETA0[self.config_id]

    def fit_config(self) -> FitConfig:
        return FitConfig(bandwidth_const=self.bandwidth_const, trim_frac=self.trim_frac,
                         restarts=self.restarts)


@dataclass(frozen=True)
class DgpDraw:
    """Observed sample plus the latent response and censoring times."""

    sample: CensoredSample
    y: np.ndarray
    c: np.ndarray
    g_true: ContinuousCdf


def true_censoring_cdf(config_id: int, censoring_param: float) -> ContinuousCdf:
    if config_id == 1:
        return ContinuousCdf(stats.uniform(0.0, censoring_param).cdf)
    return ContinuousCdf(stats.expon(scale=1.0 / censoring_param).cdf)


def _covariates(config_id, n, rng):
    if config_id == 1:
        return rng.uniform(-2.0, 2.0, size=(n, 2))
    if config_id == 2:
        return rng.uniform(0.0, 1.0, size=(n, 2))
    return np.column_stack([rng.binomial(1, 0.6, size=n).astype(float),
                            rng.uniform(-1.0, 1.0, size=n)])


def _latent(config_id, n, rng):
    x = _covariates(config_id, n, rng)
    y = _link(config_id, x @ THETA0[config_id]) + _NOISE_SD[config_id] * rng.standard_normal(n)
    return x, y


def _censor_base(config_id, n, rng):
    # unit draws scaled by the censoring parameter
    if config_id == 1:
        return rng.uniform(0.0, 1.0, size=n)
    return rng.standard_exponential(n)


def _scale(config_id, base, param):
    return base * param if config_id == 1 else base / param


def dgp_sample(config: SimulationConfig, rng: np.random.Generator, n: int | None = None) -> DgpDraw:
    n = config.n if n is None else n
    x, y = _latent(config.config_id, n, rng)
    c = _scale(config.config_id, _censor_base(config.config_id, n, rng), config.censoring_param)
    t = np.minimum(y, c)
    delta = y <= c
    return DgpDraw(CensoredSample(t, delta, x), y, c,
                   true_censoring_cdf(config.config_id, config.censoring_param))


def calibrate_censoring(config_id: int, target: float, pilot: int = 10_000, seed: int = 0,
                        tol: float = 1e-4) -> float:
    """Censoring parameter giving censoring fraction `target` on pilot draws.

    Bisection in log-parameter on common random numbers, so the pilot
    fraction is monotone in the parameter.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target censoring fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    _, y = _latent(config_id, pilot, rng)
    base = _censor_base(config_id, pilot, rng)

    def frac(log_param):
        return float(np.mean(y > _scale(config_id, base, np.exp(log_param))))

    lo, hi = -12.0, 12.0
    # fraction increases in the exponential rate and decreases in the uniform bound
    increasing = config_id != 1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = frac(mid) > target
        if above == increasing:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    return float(np.exp(0.5 * (lo + hi)))


@dataclass(frozen=True)
class MethodSummary:
    method: str
    mse: float
    mse_se: float
    median_error: float
    mean_censoring: float
    mean_trimmed: float
    failures: int
    replications: int
    estimates: np.ndarray = field(repr=False)
    std_errors: np.ndarray = field(repr=False)

    @property
    def failure_flag(self) -> bool:
        return self.failures > 0.05 * self.replications

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mse": self.mse,
            "mse_se": self.mse_se,
            "median_error": self.median_error,
            "mean_censoring": self.mean_censoring,
            "mean_trimmed": self.mean_trimmed,
            "failures": self.failures,
            "replications": self.replications,
            "failure_flag": self.failure_flag,
        }


@dataclass(frozen=True)
class MseReport:
    config: SimulationConfig
    summaries: tuple

    def __getitem__(self, method: str) -> MethodSummary:
        for s in self.summaries:
            if s.method == method.upper():
                return s
        raise KeyError(method)

    def to_dict(self) -> dict:
        c = self.config
        return {
            "config_id": c.config_id,
            "censoring_param": c.censoring_param,
            "n": c.n,
            "replications": c.replications,
            "seed": c.seed,
            "theta0": c.theta0.tolist(),
            "bandwidth_const": c.bandwidth_const,
            "trim_frac": c.trim_frac,
            "methods": {s.method: s.to_dict() for s in self.summaries},
        }


def worker_count(workers: int | None = None) -> int:
    """Explicit count, else ``CENSIM_THREADS``, else 1."""
    if workers is None:
        workers = int(os.environ.get("CENSIM_THREADS", "1") or 1)
    return max(1, int(workers))


def _replicate(config: SimulationConfig, r: int) -> dict:
    rng = np.random.default_rng([config.seed, r])
    draw = dgp_sample(config, rng)
    out = {"censoring": draw.sample.censoring_fraction}
    fc = config.fit_config()
    for k, method in enumerate(config.methods):
        try:
            res = fit(draw.sample, method, fc, rng=np.random.default_rng([config.seed, r, k]))
        except CensimError as exc:
            log.debug("replication %d %s failed: %s", r, method, exc)
            out[method] = None
            continue
        se = res.se if res.se is not None else np.full(res.theta_hat.d - 1, np.nan)
        out[method] = (res.theta_hat.theta, se, res.trimmed_fraction)
    return out


def _summarize(config: SimulationConfig, reps: list, method: str) -> MethodSummary:
    d = config.theta0.size
    est = np.full((len(reps), d), np.nan)
    ses = np.full((len(reps), d - 1), np.nan)
    trimmed = []
    for i, rep in enumerate(reps):
        got = rep[method]
        if got is None:
            continue
        est[i], ses[i] = got[0], got[1]
        trimmed.append(got[2])
    ok = ~np.isnan(est[:, 0])
    sq = np.sum((est[ok] - config.theta0) ** 2, axis=1)
    m = int(ok.sum())
    return MethodSummary(
        method=method,
        mse=float(np.mean(sq)) if m else float("nan"),
        mse_se=float(np.std(sq, ddof=1) / np.sqrt(m)) if m > 1 else float("nan"),
        median_error=float(np.median(np.sqrt(sq))) if m else float("nan"),
        mean_censoring=float(np.mean([rep["censoring"] for rep in reps])),
        mean_trimmed=float(np.mean(trimmed)) if trimmed else float("nan"),
        failures=len(reps) - m,
        replications=len(reps),
        estimates=est,
        std_errors=ses,
    )


def run_monte_carlo(config: SimulationConfig, workers: int | None = None) -> MseReport:
    """Run all replications and aggregate per-method MSE summaries.

    Replication ``r`` draws from ``default_rng([seed, r])`` so results do not
    depend on the number of workers.
    """
    workers = worker_count(workers)
    idx = range(config.replications)
    if workers == 1:
        reps = [_replicate(config, r) for r in idx]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(_replicate, [config] * config.replications, idx))
    summaries = tuple(_summarize(config, reps, m) for m in config.methods)
    for s in summaries:
        if s.failure_flag:
            log.warning("%s: %d of %d replications failed", s.method, s.failures, s.replications)
    return MseReport(config, summaries)
