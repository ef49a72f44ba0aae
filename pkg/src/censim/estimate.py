"""Trimmed M-estimation of the single-index direction under right censoring.

Two criteria are available. ``WLS`` weights squared residuals of the observed
times by their Kaplan-Meier masses; ``SD`` averages squared residuals of the
synthetic responses over the whole sample. In both cases the link is the
censored Nadaraya-Watson estimate refitted at every candidate direction.

The estimate is computed in two stages: a grid-plus-polish preliminary fit
trimmed on a fixed covariate box, then a Nelder-Mead search in a small ball
around it, trimmed where the estimated index density is low.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import (
    CensimError,
    EmptyCriterionError,
    SingularInformationError,
)
from .smooth import (
    BandwidthRule,
    KernelSpec,
    LinkEstimate,
    TrimmingSpec,
    bandwidth,
    link_fit,
    trimming_indicator,
)
from .survival import (
    CensoredSample,
    WeightedSample,
    as_sample,
    c_integral,
    empirical_cdf,
    km_fit,
    km_weights,
)
from .transform import SyntheticSample, synthetic_transform

__all__ = [
    "IndexParam",
    "SearchRegion",
    "FitConfig",
    "FitResult",
    "criterion_wls",
    "criterion_sd",
    "preliminary_fit",
    "fit",
    "variance_plugin",
]

METHODS = ("WLS", "SD")


def _method(method: str) -> str:
    m = method.upper()
    if m not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected WLS or SD")
    return m


@dataclass(frozen=True)
class IndexParam:
    """Index direction with its first coordinate pinned to one."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.array(self.theta, dtype=float).reshape(-1)
        if th.size < 1 or th[0] != 1.0:
            raise ValueError("the first coordinate of theta must equal 1")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @classmethod
    def from_free(cls, free) -> "IndexParam":
        return cls(np.concatenate(([1.0], np.asarray(free, dtype=float).reshape(-1))))

    @property
    def free(self) -> np.ndarray:
        return self.theta[1:]

    @property
    def d(self) -> int:
        return self.theta.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.theta, dtype=dtype)

    def __repr__(self):
        return f"IndexParam({self.theta.tolist()})"


@dataclass(frozen=True)
class SearchRegion:
    """Sup-norm ball over the free coordinates."""

    center: IndexParam
    radius: float

    def __post_init__(self):
        if not isinstance(self.center, IndexParam):
            object.__setattr__(self, "center", IndexParam(self.center))
        if not self.radius > 0:
            raise ValueError("search radius must be positive")

    @property
    def bounds(self):
        c = self.center.free
        return list(zip(c - self.radius, c + self.radius))

    def contains(self, theta) -> bool:
        free = np.asarray(theta, dtype=float)[1:]
        return bool(np.all(np.abs(free - self.center.free) <= self.radius + 1e-12))


@dataclass(frozen=True)
class FitConfig:
    bandwidth_const: float = 1.0
    kernel: str = "triweight"
    trim_frac: float = 0.1
    box_quantiles: tuple = (0.1, 0.9)
    search: SearchRegion | None = None
    grid_points: int = 41
    restarts: int = 3
    xatol: float = 1e-6
    fatol: float = 1e-8
    maxfev: int = 500
    seed: int = 0

    def default_search(self, d: int) -> SearchRegion:
        if self.search is not None:
            return self.search
        return SearchRegion(IndexParam(np.eye(d)[0]), 5.0)


@dataclass(frozen=True)
class FitResult:
    theta_hat: IndexParam
    criterion_value: float
    method: str
    vcov: np.ndarray | None
    n_trimmed: int
    converged: bool
    evaluations: int
    n_obs: int
    theta_prelim: IndexParam
    bandwidth: float
    radius: float
    censoring_fraction: float
    variance_error: str | None = None

    @property
    def se(self) -> np.ndarray | None:
        """Standard errors of the free coordinates of `theta_hat`."""
        if self.vcov is None:
            return None
        return np.sqrt(np.diag(self.vcov) / self.n_obs)

    @property
    def trimmed_fraction(self) -> float:
        return self.n_trimmed / self.n_obs

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "theta_hat": self.theta_hat.theta.tolist(),
            "se": None if self.se is None else self.se.tolist(),
            "vcov": None if self.vcov is None else self.vcov.tolist(),
            "criterion_value": self.criterion_value,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "n_obs": self.n_obs,
            "n_trimmed": self.n_trimmed,
            "trimmed_fraction": self.trimmed_fraction,
            "censoring_fraction": self.censoring_fraction,
            "theta_prelim": self.theta_prelim.theta.tolist(),
            "bandwidth": self.bandwidth,
            "radius": self.radius,
            "variance_error": self.variance_error,
        }


def _trim_mask(trim, n) -> np.ndarray:
    if trim is None:
        return np.ones(n, dtype=bool)
    return np.asarray(trim).astype(bool).reshape(-1)


def criterion_wls(theta, weighted: WeightedSample, link: LinkEstimate, trim=None) -> float:
    """``sum_i W_in (T_i - f(theta'X_i; theta))^2 J_i`` over uncensored points.

    `trim` is a 0/1 mask over the sample. Points where the link is invalid
    are dropped as if trimmed.
    """
    s = weighted.sample
    keep = _trim_mask(trim, s.n) & (weighted.weights > 0)
    idx = np.flatnonzero(keep)
    fitted = link.at_sample(idx) if idx.size else np.empty(0)
    ok = ~np.isnan(fitted)
    if not np.any(ok):
        raise EmptyCriterionError()
    res = s.t[idx[ok]] - fitted[ok]
    return float(np.sum(weighted.weights[idx[ok]] * res * res))


def criterion_sd(theta, synthetic: SyntheticSample, link: LinkEstimate, trim=None) -> float:
    """``n^-1 sum_i (Y*_i - f(theta'X_i; theta))^2 J_i`` over all points."""
    s = synthetic.sample
    idx = np.flatnonzero(_trim_mask(trim, s.n))
    fitted = link.at_sample(idx) if idx.size else np.empty(0)
    ok = ~np.isnan(fitted)
    if not np.any(ok):
        raise EmptyCriterionError()
    res = synthetic.y_star[idx[ok]] - fitted[ok]
    return float(np.sum(res * res) / s.n)


class _Objective:
    """Criterion as a function of the free coordinates, with the link refit per call."""

    def __init__(self, method, weighted, synthetic, trim, rule, kernel):
        self.method = method
        self.weighted = weighted
        self.synthetic = synthetic
        self.trim = trim
        self.rule = rule
        self.kernel = kernel
        self.cache: dict = {}

    def link(self, theta) -> LinkEstimate:
        th = np.asarray(theta, dtype=float)
        h = bandwidth(self.rule, self.synthetic.sample.x @ th)
        return link_fit(th, self.synthetic, h, self.kernel)

    def value(self, theta) -> float:
        th = np.asarray(theta, dtype=float)
        link = self.link(th)
        if self.method == "WLS":
            return criterion_wls(th, self.weighted, link, self.trim)
        return criterion_sd(th, self.synthetic, link, self.trim)

    def __call__(self, free) -> float:
        key = tuple(np.round(np.asarray(free, dtype=float), 15))
        if key not in self.cache:
            try:
                self.cache[key] = self.value(np.concatenate(([1.0], free)))
            except CensimError:
                self.cache[key] = np.inf
        return self.cache[key]


def _grid(region: SearchRegion, points: int, budget: int = 2500):
    k = region.center.d - 1
    per_dim = points
    while k > 1 and per_dim**k > budget and per_dim > 3:
        per_dim -= 2
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in region.bounds]
    return np.array(list(itertools.product(*axes)))


def _nelder_mead(obj, x0, bounds, step, config: FitConfig):
    x0 = np.clip(np.asarray(x0, dtype=float), [b[0] for b in bounds], [b[1] for b in bounds])
    k = x0.size
    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(k)])
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    for j in range(1, k + 1):
        if simplex[j, j - 1] > hi[j - 1]:
            simplex[j, j - 1] = x0[j - 1] - step
    simplex = np.clip(simplex, lo, hi)
    return minimize(
        obj,
        x0,
        method="Nelder-Mead",
        bounds=bounds,
        options={
            "initial_simplex": simplex,
            "xatol": config.xatol,
            "fatol": config.fatol,
            "maxfev": config.maxfev,
        },
    )


def _setup(sample, config: FitConfig):
    s = as_sample(sample)
    g_hat = km_fit(s, "censoring")
    synthetic = synthetic_transform(s, g_hat)
    weighted = km_weights(s)
    rule = BandwidthRule(config.bandwidth_const)
    return s, g_hat, synthetic, weighted, rule, KernelSpec(config.kernel)


def preliminary_fit(sample, method: str = "WLS", box: TrimmingSpec | None = None,
                    search: SearchRegion | None = None,
                    config: FitConfig = FitConfig()) -> IndexParam:
    """Coarse grid over `search`, then a bounded Nelder-Mead polish.

    Trimming uses the fixed covariate box `box` (default: the per-coordinate
    quantile box from `config.box_quantiles`).
    """
    method = _method(method)
    s, _, synthetic, weighted, rule, kernel = _setup(sample, config)
    theta, _ = _preliminary(s, method, synthetic, weighted, rule, kernel, box, search, config)
    return theta


def _preliminary(s, method, synthetic, weighted, rule, kernel, box, search, config):
    if box is None:
        box = TrimmingSpec.quantile_box(s.x, *config.box_quantiles)
    region = search if search is not None else config.default_search(s.d)
    trim = trimming_indicator(box, region.center, s.x, 1.0, s.x)
    obj = _Objective(method, weighted, synthetic, trim, rule, kernel)
    grid = _grid(region, config.grid_points)
    values = np.array([obj(g) for g in grid])
    if not np.any(np.isfinite(values)):
        raise EmptyCriterionError()
    best = grid[int(np.argmin(values))]
    step = 2 * region.radius / max(config.grid_points - 1, 1)
    res = _nelder_mead(obj, best, region.bounds, step, config)
    free = res.x if res.fun <= values.min() else best
    return IndexParam.from_free(free), len(obj.cache)


def fit(sample, method: str = "WLS", config: FitConfig = FitConfig(), rng=None,
        variance: bool = True) -> FitResult:
    """Estimate the index direction by the WLS or SD criterion.

    Parameters
    ----------
    sample : CensoredSample or sequence of Observation
    method : {"WLS", "SD"}
    config : FitConfig
    rng : numpy.random.Generator, optional
        Source of the random restart points. Defaults to ``config.seed``.
    variance : bool
        Compute the plug-in sandwich covariance.
    """
    method = _method(method)
    s, g_hat, synthetic, weighted, rule, kernel = _setup(sample, config)
    if s.d < 2:
        raise ValueError("at least two covariates are required")
    if s.n < 10 * s.d:
        raise ValueError(f"need at least {10 * s.d} observations, got {s.n}")
    rng = np.random.default_rng(config.seed) if rng is None else rng

    theta_n, n_eval = _preliminary(s, method, synthetic, weighted, rule, kernel,
                                   None, None, config)
    h_n = bandwidth(rule, s.x @ theta_n.theta)
    density_trim = TrimmingSpec.density_fraction(theta_n, s.x, h_n, config.trim_frac, kernel)
    trim = trimming_indicator(density_trim, theta_n, s.x, h_n, s.x, kernel).astype(bool)

    radius = max(0.5 * s.n ** -0.25, 2.0 * h_n)
    center = theta_n.free
    bounds = list(zip(center - radius, center + radius))
    obj = _Objective(method, weighted, synthetic, trim, rule, kernel)

    starts = [center]
    for _ in range(max(config.restarts, 1) - 1):
        starts.append(center + rng.uniform(-radius, radius, size=center.size))
    best = None
    for x0 in starts:
        res = _nelder_mead(obj, x0, bounds, radius / 2, config)
        if best is None or res.fun < best.fun:
            best = res
    if not np.isfinite(best.fun):
        raise EmptyCriterionError()
    theta_hat = IndexParam.from_free(best.x)

    vcov, verr = None, None
    link = obj.link(theta_hat.theta)
    if variance:
        try:
            vcov = variance_plugin(s, theta_hat, link, method, trim=trim, g_hat=g_hat)
        except CensimError as exc:
            verr = str(exc)
    return FitResult(
        theta_hat=theta_hat,
        criterion_value=float(best.fun),
        method=method,
        vcov=vcov,
        n_trimmed=int(s.n - trim.sum()),
        converged=bool(best.success),
        evaluations=n_eval + len(obj.cache),
        n_obs=s.n,
        theta_prelim=theta_n,
        bandwidth=float(link.h),
        radius=float(radius),
        censoring_fraction=s.censoring_fraction,
        variance_error=verr,
    )


def _psi_matrix(s: CensoredSample, g_hat, h_hat) -> np.ndarray:
    """``psi[i, j] = psi(T_j; T_i, delta_i)`` with G and H replaced by estimates.

    ``psi(y; T, delta) = (1 - delta) 1{T < y} / (1 - H(T))
    - sum_{v < min(T, y)} dG(v) / ((1 - H(v)) (1 - G(v)))``
    """
    t = s.t
    surv_h = 1.0 - np.asarray(h_hat.value(t))
    inv = np.divide(1.0, surv_h, out=np.zeros_like(surv_h), where=surv_h > 0)
    first = ((~s.delta) * inv)[:, None] * (t[:, None] < t[None, :])
    second = c_integral(g_hat, h_hat, np.minimum(t[:, None], t[None, :]), strict=True)
    return first - second


def variance_plugin(sample, theta_hat, link: LinkEstimate, method: str = "WLS",
                    trim=None, g_hat=None) -> np.ndarray:
    """Plug-in sandwich ``V^-1 W V^-1`` over the free coordinates.

    ``V`` averages ``J_i grad_i grad_i'`` and ``W`` is the second moment of
    the estimated influence terms, each the IPCW residual score plus its
    Kaplan-Meier correction integral. Divide by ``n`` for the covariance of
    ``theta_hat``.
    """
    method = _method(method)
    s = as_sample(sample)
    if g_hat is None:
        g_hat = km_fit(s, "censoring")
    h_hat = empirical_cdf(s.t)
    w = km_weights(s).weights
    y_star = synthetic_transform(s, g_hat).y_star
    keep = _trim_mask(trim, s.n)

    grad = link.gradient_at_sample()[:, 1:]
    fitted = link.at_sample()
    keep = keep & ~np.isnan(fitted) & ~np.any(np.isnan(grad), axis=1)
    if not np.any(keep):
        raise EmptyCriterionError()
    g = np.where(keep[:, None], grad, 0.0)
    f = np.where(keep, fitted, 0.0)

    v_hat = g.T @ g / s.n
    eig = np.linalg.eigvalsh(v_hat)
    # gradients at rounding level of y* x / h count as zero
    floor = (1e-10 * np.max(np.abs(link.y_star)) * np.max(np.abs(s.x)) / link.h) ** 2
    if eig.max() <= floor or eig.min() <= 1e-10 * eig.max():
        raise SingularInformationError()

    if method == "WLS":
        score = (s.n * w * (s.t - f))[:, None] * g
        phi = (s.t - f)[:, None] * g
    else:
        score = (y_star - f)[:, None] * g
        phi = s.t[:, None] * g
    if np.any(~s.delta):
        psi = _psi_matrix(s, g_hat, h_hat)
        score = score + psi @ (w[:, None] * phi)
    w_hat = score.T @ score / s.n
    v_inv = np.linalg.inv(v_hat)
    out = v_inv @ w_hat @ v_inv
    return (out + out.T) / 2
