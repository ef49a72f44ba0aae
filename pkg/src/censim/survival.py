"""Product-limit estimation for right-censored responses.

The observed data are ``T = min(Y, C)`` and ``delta = 1{Y <= C}`` together with
a covariate vector ``X``. This module estimates the laws of ``Y`` (F), ``C``
(G) and ``T`` (H), and derives the Kaplan-Meier masses attached to each
observation.

At equal observed times, uncensored observations are processed before
censored ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, NamedTuple

import numpy as np

from .errors import EmptySampleError, TailTruncationWarning, WeightSingularityError

__all__ = [
    "Observation",
    "CensoredSample",
    "StepCdf",
    "ContinuousCdf",
    "WeightedSample",
    "as_sample",
    "km_fit",
    "empirical_cdf",
    "km_weights",
    "ideal_weights",
    "c_integral",
]


class Observation(NamedTuple):
    """A single censored data point ``(T, delta, X)``."""

    t: float
    delta: bool
    x: tuple = ()


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CensoredSample:
    """Column-oriented storage for a sequence of observations.

    Parameters
    ----------
    t : array_like of shape (n,)
        Observed times ``min(Y, C)``.
    delta : array_like of shape (n,)
        Event indicators; truthy when the response was observed.
    x : array_like of shape (n, d), optional
        Covariates. A 1-D array is read as a single covariate.
    """

    t: np.ndarray
    delta: np.ndarray
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        delta = np.asarray(self.delta)
        if delta.dtype != bool:
            if not np.all(np.isin(delta, (0, 1))):
                raise ValueError("delta must be 0/1 valued")
            delta = delta.astype(bool)
        delta = delta.reshape(-1)
        if delta.shape != t.shape:
            raise ValueError("t and delta must have the same length")
        if not np.all(np.isfinite(t)):
            raise ValueError("observed times must be finite")
        if self.x is None:
            x = np.zeros((t.size, 0))
        else:
            x = np.asarray(self.x, dtype=float)
            if x.ndim == 1:
                x = x[:, None]
            if x.ndim != 2 or x.shape[0] != t.size:
                raise ValueError("x must have shape (n, d)")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "delta", _frozen(delta))
        object.__setattr__(self, "x", _frozen(x))

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "CensoredSample":
        obs = list(observations)
        if not obs:
            return cls(np.empty(0), np.empty(0, dtype=bool), np.empty((0, 0)))
        dims = {len(o.x) for o in obs}
        if len(dims) != 1:
            raise ValueError("covariate dimension differs across observations")
        (d,) = dims
        x = np.array([tuple(o.x) for o in obs], dtype=float).reshape(len(obs), d)
        return cls([o.t for o in obs], np.array([bool(o.delta) for o in obs]), x)

    def __len__(self) -> int:
        return self.t.size

    def __iter__(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Observation:
        return Observation(float(self.t[i]), bool(self.delta[i]), tuple(self.x[i]))

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def censoring_fraction(self) -> float:
        if self.n == 0:
            return 0.0
        return float(1.0 - self.delta.mean())

    def subset(self, idx) -> "CensoredSample":
        return CensoredSample(self.t[idx], self.delta[idx], self.x[idx])


def as_sample(sample) -> CensoredSample:
    """Coerce a `CensoredSample`, an iterable of `Observation`, or ``(t, delta[, x])``."""
    if isinstance(sample, CensoredSample):
        return sample
    if isinstance(sample, tuple) and len(sample) in (2, 3) and not isinstance(sample[0], Observation):
        return CensoredSample(*sample)
    return CensoredSample.from_observations(
        o if isinstance(o, Observation) else Observation(*o) for o in sample
    )


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous step distribution function.

    ``value(t)`` is the cumulative mass at the largest jump time ``<= t`` and
    ``value_minus(t)`` the mass at jump times strictly below ``t``. The final
    mass may be below one (defective distribution).
    """

    jump_times: np.ndarray
    cum_mass: np.ndarray

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float).reshape(-1)
        cm = np.asarray(self.cum_mass, dtype=float).reshape(-1)
        if jt.shape != cm.shape:
            raise ValueError("jump_times and cum_mass must have the same length")
        if jt.size > 1 and np.any(np.diff(jt) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        if cm.size and (cm[0] < 0 or np.any(np.diff(cm) < 0) or cm[-1] > 1 + 1e-12):
            raise ValueError("cum_mass must be nondecreasing in [0, 1]")
        object.__setattr__(self, "jump_times", _frozen(jt))
        object.__setattr__(self, "cum_mass", _frozen(cm))

    def _lookup(self, t, side):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.jump_times, t, side=side)
        padded = np.concatenate(([0.0], self.cum_mass))
        out = padded[k]
        return float(out) if out.ndim == 0 else out

    def value(self, t):
        return self._lookup(t, "right")

    def value_minus(self, t):
        return self._lookup(t, "left")

    __call__ = value

    @property
    def masses(self) -> np.ndarray:
        """Jump sizes at `jump_times`."""
        return np.diff(self.cum_mass, prepend=0.0)

    @property
    def total_mass(self) -> float:
        return float(self.cum_mass[-1]) if self.cum_mass.size else 0.0


class ContinuousCdf:
    """A known continuous distribution function (left limit equals value).

    Used wherever a true censoring law replaces its product-limit estimate,
    e.g. ``ContinuousCdf(scipy.stats.expon(scale=10).cdf)``.
    """

    def __init__(self, cdf: Callable[[np.ndarray], np.ndarray]):
        self._cdf = cdf

    def value(self, t):
        out = np.asarray(self._cdf(np.asarray(t, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    value_minus = value
    __call__ = value


def _event_table(t, events, events_first):
    """Distinct times with event counts and at-risk sizes for the target type."""
    times, inv = np.unique(t, return_inverse=True)
    n_at = np.bincount(inv, minlength=times.size)
    n_ev = np.bincount(inv, weights=events.astype(float), minlength=times.size)
    n_after = t.size - np.cumsum(n_at)  # strictly later than each time
    if events_first:
        at_risk = n_after + n_at
    else:
        # the other type at the same time has already left the risk set
        at_risk = n_after + n_ev
    return times, n_ev, at_risk


def km_fit(sample, target: str = "event") -> StepCdf:
    """Product-limit estimate of F (``target="event"``) or G (``"censoring"``).

    For the censoring law the roles of ``delta`` are flipped. Ties are
    resolved by treating events as occurring just before censorings.
    """
    s = as_sample(sample)
    if s.n == 0:
        raise EmptySampleError()
    if target == "event":
        if np.all(s.delta):
            # product-limit reduces to the empirical CDF; return it exactly
            return empirical_cdf(s.t)
        times, d, r = _event_table(s.t, s.delta, events_first=True)
    elif target == "censoring":
        times, d, r = _event_table(s.t, ~s.delta, events_first=False)
    else:
        raise ValueError(f"unknown target {target!r}")
    keep = d > 0
    times, d, r = times[keep], d[keep], r[keep]
    surv = np.cumprod(1.0 - d / r)
    return StepCdf(times, np.clip(1.0 - surv, 0.0, 1.0))


def empirical_cdf(t) -> StepCdf:
    """Empirical distribution function of the observed times (H hat)."""
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size == 0:
        raise EmptySampleError()
    times, counts = np.unique(t, return_counts=True)
    return StepCdf(times, np.cumsum(counts) / t.size)


@dataclass(frozen=True)
class WeightedSample:
    """Observations carrying Kaplan-Meier masses ``W_in``."""

    sample: CensoredSample
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != self.sample.n:
            raise ValueError("one weight per observation is required")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def defect(self) -> float:
        """Mass left unassigned when the largest observation is censored."""
        return max(0.0, 1.0 - self.total_mass)


def km_weights(sample) -> WeightedSample:
    """Kaplan-Meier jump attached to each observation.

    The jump of F hat at an uncensored time is split evenly among the
    uncensored observations sharing that time; censored points get zero.
    """
    s = as_sample(sample)
    f_hat = km_fit(s, "event")
    w = np.zeros(s.n)
    if f_hat.jump_times.size:
        ev = np.flatnonzero(s.delta)
        k = np.searchsorted(f_hat.jump_times, s.t[ev])
        ties = np.bincount(k, minlength=f_hat.jump_times.size)
        w[ev] = f_hat.masses[k] / ties[k]
    return WeightedSample(s, w)


def ideal_weights(sample, g_true) -> WeightedSample:
    """Weights ``delta_i / (n (1 - G(T_i-)))`` under a known censoring law."""
    s = as_sample(sample)
    if s.n == 0:
        raise EmptySampleError()
    w = np.zeros(s.n)
    ev = np.flatnonzero(s.delta)
    surv = 1.0 - np.atleast_1d(g_true.value_minus(s.t[ev]))
    if np.any(surv <= 0):
        raise WeightSingularityError()
    w[ev] = 1.0 / (s.n * surv)
    return WeightedSample(s, w)


def c_integral(g_hat: StepCdf, h_hat: StepCdf, y, strict: bool = False):
    """Plug-in ``C(y) = sum_{s <= y} dG(s) / ((1 - H(s)) (1 - G(s)))``.

    The sum runs over the jumps of `g_hat`; with ``strict=True`` only jumps
    ``s < y`` count. Jumps at or beyond the first point where ``1 - H`` or
    ``1 - G`` vanishes are dropped with a `TailTruncationWarning`.
    """
    s = g_hat.jump_times
    dg = g_hat.masses
    denom = (1.0 - np.asarray(h_hat.value(s))) * (1.0 - g_hat.cum_mass)
    bad = np.flatnonzero(denom <= 1e-14)
    terms = np.zeros_like(dg)
    last = bad[0] if bad.size else s.size
    terms[:last] = dg[:last] / denom[:last]
    y_arr = np.asarray(y, dtype=float)
    k = np.searchsorted(s, y_arr, side="left" if strict else "right")
    if bad.size and np.any(k > last):
        warnings.warn("tail truncation", TailTruncationWarning, stacklevel=2)
    cum = np.concatenate(([0.0], np.cumsum(terms)))
    out = cum[np.minimum(k, last)]
    return float(out) if out.ndim == 0 else out
