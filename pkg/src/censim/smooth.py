"""Kernel smoothing along a single index.

Contains the compact-support kernels, the bandwidth rule, the kernel density
of the index ``theta'X``, the censored Nadaraya-Watson link estimator built
on synthetic responses, its analytic gradient in ``theta``, and trimming.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateIndexError, EmptyNeighborhoodError

__all__ = [
    "KernelSpec",
    "BandwidthRule",
    "TrimmingSpec",
    "LinkEstimate",
    "kernel_eval",
    "bandwidth",
    "index_density",
    "link_fit",
    "link_gradient",
    "trimming_indicator",
]

EPS_DEN = 1e-10


def _triweight(u, order):
    v = 1.0 - u * u
    if order == 0:
        return 35.0 / 32.0 * v**3
    if order == 1:
        return -105.0 / 16.0 * u * v**2
    return -105.0 / 16.0 * v * (1.0 - 5.0 * u * u)


def _biweight(u, order):
    v = 1.0 - u * u
    if order == 0:
        return 15.0 / 16.0 * v**2
    if order == 1:
        return -15.0 / 4.0 * u * v
    return -15.0 / 4.0 * (1.0 - 3.0 * u * u)


def _epanechnikov(u, order):
    if order == 0:
        return 0.75 * (1.0 - u * u)
    if order == 1:
        return -1.5 * u
    return np.full_like(u, -1.5)


_FAMILIES = {
    "triweight": _triweight,
    "biweight": _biweight,
    "epanechnikov": _epanechnikov,
}


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric kernel supported on [-1, 1].

    Only the triweight default is twice differentiable with a Lipschitz second
    derivative on the whole line.
    """

    family: str = "triweight"

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")

    def __call__(self, u, order: int = 0):
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        u = np.asarray(u, dtype=float)
        if order == 0 and self.family != "epanechnikov":
            v = np.maximum(1.0 - u * u, 0.0)
            out = 35.0 / 32.0 * v * v * v if self.family == "triweight" else 15.0 / 16.0 * v * v
            return float(out) if out.ndim == 0 else out
        inside = np.abs(u) <= 1.0
        uc = np.where(inside, u, 0.0)
        out = np.where(inside, _FAMILIES[self.family](uc, order), 0.0)
        return float(out) if out.ndim == 0 else out


def kernel_eval(spec: KernelSpec, u, order: int = 0):
    """K(u), K'(u) or K''(u); zero outside the support."""
    return spec(u, order)


@dataclass(frozen=True)
class BandwidthRule:
    """``h = constant * sd(theta'X) * (log n / n) ** (1/5)``."""

    constant: float = 1.0

    def __post_init__(self):
        if not self.constant > 0:
            raise ValueError("bandwidth constant must be positive")


def bandwidth(rule: BandwidthRule, index_values) -> float:
    u = np.asarray(index_values, dtype=float).reshape(-1)
    n = u.size
    if n < 2:
        raise ValueError("bandwidth needs at least two index values")
    s = float(np.std(u, ddof=1))
    if not s > 0:
        raise DegenerateIndexError()
    return rule.constant * s * (np.log(n) / n) ** 0.2


def index_density(theta, x, h: float, u, kernel: KernelSpec = KernelSpec()):
    """Kernel density of ``theta'X`` evaluated at `u`."""
    idx = np.asarray(x, dtype=float) @ np.asarray(theta, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    k = kernel((idx[None, :] - u_arr.reshape(-1, 1)) / h)
    out = k.sum(axis=1) / (idx.size * h)
    return float(out[0]) if u_arr.ndim == 0 else out.reshape(u_arr.shape)


@dataclass(frozen=True)
class LinkEstimate:
    """Nadaraya-Watson regression of the synthetic responses on ``theta'X``.

    ``f(u) = sum_i K((theta'X_i - u)/h) Y*_i / sum_i K((theta'X_i - u)/h)``.
    Points whose kernel mass falls below ``n h eps_den`` are invalid.
    """

    theta: np.ndarray
    h: float
    x: np.ndarray
    y_star: np.ndarray
    kernel: KernelSpec = KernelSpec()
    eps_den: float = EPS_DEN
    index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y_star", np.asarray(self.y_star, dtype=float))
        object.__setattr__(self, "index", self.x @ self.theta)
        if not self.h > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def n(self) -> int:
        return self.index.size

    def _weights(self, u, order=0):
        u = np.asarray(u, dtype=float).reshape(-1)
        return self.kernel((self.index[None, :] - u[:, None]) / self.h, order)

    def _ratio(self, k):
        den = k.sum(axis=1)
        num = k @ self.y_star
        valid = den >= self.n * self.h * self.eps_den
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(valid, num / np.where(valid, den, 1.0), np.nan)
        return val, valid

    def evaluate(self, u):
        """Values at index points `u`; NaN where invalid."""
        u_arr = np.asarray(u, dtype=float)
        val, _ = self._ratio(self._weights(u_arr))
        return float(val[0]) if u_arr.ndim == 0 else val.reshape(u_arr.shape)

    def valid(self, u):
        u_arr = np.asarray(u, dtype=float)
        _, ok = self._ratio(self._weights(u_arr))
        return bool(ok[0]) if u_arr.ndim == 0 else ok.reshape(u_arr.shape)

    def __call__(self, u):
        val = np.asarray(self.evaluate(u))
        if np.any(np.isnan(val)):
            raise EmptyNeighborhoodError()
        return float(val) if val.ndim == 0 else val

    def at(self, x):
        """``f(theta'x; theta)`` for covariate rows `x`; NaN where invalid."""
        return self.evaluate(np.atleast_2d(x) @ self.theta)

    def _sample_kernels(self, idx, order, leave_one_out):
        idx = np.arange(self.n) if idx is None else np.asarray(idx, dtype=int).reshape(-1)
        scaled = self.index / self.h
        k = self.kernel(scaled[None, :] - scaled[idx, None], order)
        if leave_one_out:
            k[np.arange(idx.size), idx] = 0.0
        return idx, k

    def at_sample(self, idx=None, leave_one_out: bool = True):
        """Fitted values at sample points, by default leaving each point out.

        NaN where invalid.
        """
        _, k = self._sample_kernels(idx, 0, leave_one_out)
        return self._ratio(k)[0]

    def _gradient(self, x, k, kp, strict):
        f, valid = self._ratio(k)
        if strict and not np.all(valid):
            raise EmptyNeighborhoodError()
        den = k.sum(axis=1)
        kpy = kp * self.y_star[None, :]
        # d/dtheta of sum_j K(a_j) g_j = sum_j K'(a_j) g_j (X_j - x) / h
        d_num = (kpy @ self.x - kpy.sum(axis=1)[:, None] * x) / self.h
        d_den = (kp @ self.x - kp.sum(axis=1)[:, None] * x) / self.h
        with np.errstate(invalid="ignore", divide="ignore"):
            g = (d_num - f[:, None] * d_den) / den[:, None]
        g[~valid] = np.nan
        return g

    def gradient(self, x, strict: bool = True):
        """Gradient of ``theta -> f(theta'x; theta)`` at covariate rows `x`.

        Differentiates the kernel arguments ``(theta'X_i - theta'x)/h``; the
        bandwidth is held fixed. Returns shape (m, d); invalid rows are NaN
        unless `strict`, in which case they raise.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = (self.index[None, :] - (x @ self.theta)[:, None]) / self.h
        return self._gradient(x, self.kernel(a), self.kernel(a, 1), strict)

    def gradient_at_sample(self, idx=None, leave_one_out: bool = True):
        """Gradient at sample points, NaN where invalid."""
        idx, k = self._sample_kernels(idx, 0, leave_one_out)
        _, kp = self._sample_kernels(idx, 1, leave_one_out)
        return self._gradient(self.x[idx], k, kp, strict=False)


def link_fit(theta, synthetic, h: float, kernel: KernelSpec = KernelSpec()) -> LinkEstimate:
    """Fit the censored Nadaraya-Watson link on a `SyntheticSample`."""
    return LinkEstimate(theta, h, synthetic.sample.x, synthetic.y_star, kernel)


def link_gradient(estimate: LinkEstimate, x):
    g = estimate.gradient(x, strict=True)
    return g[0] if np.ndim(x) == 1 else g


@dataclass(frozen=True)
class TrimmingSpec:
    """Trimming rule.

    ``fixed_box`` keeps covariates inside ``[lower, upper]`` coordinate-wise;
    ``density`` keeps points where the index density is at least `threshold`.
    """

    mode: str = "density"
    threshold: float | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.mode == "fixed_box":
            if self.lower is None or self.upper is None:
                raise ValueError("fixed_box trimming needs lower and upper bounds")
            object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
            object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        elif self.mode == "density":
            if self.threshold is None or not self.threshold > 0:
                raise ValueError("density trimming needs a positive threshold")
        else:
            raise ValueError(f"unknown trimming mode {self.mode!r}")

    @classmethod
    def quantile_box(cls, x, lo: float = 0.1, hi: float = 0.9) -> "TrimmingSpec":
        x = np.asarray(x, dtype=float)
        return cls("fixed_box", lower=np.quantile(x, lo, axis=0), upper=np.quantile(x, hi, axis=0))

    @classmethod
    def density_fraction(cls, theta, x, h, frac: float = 0.1,
                         kernel: KernelSpec = KernelSpec()) -> "TrimmingSpec":
        """Threshold at `frac` times the largest density over the sample index."""
        idx = np.asarray(x, dtype=float) @ np.asarray(theta, dtype=float)
        dens = index_density(theta, x, h, idx, kernel)
        return cls("density", threshold=frac * float(dens.max()))


def trimming_indicator(spec: TrimmingSpec, theta, sample_x, h, x,
                       kernel: KernelSpec = KernelSpec()):
    """0/1 trimming indicator at covariate rows `x`."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if spec.mode == "fixed_box":
        keep = np.all((x >= spec.lower) & (x <= spec.upper), axis=1)
    else:
        dens = index_density(theta, sample_x, h, x @ np.asarray(theta, dtype=float), kernel)
        keep = dens >= spec.threshold
    return keep.astype(int)
