"""Synthetic responses ``Y* = delta T / (1 - G(T-))`` (Koul, Susarla and Van Ryzin)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySampleError, WeightSingularityError
from .survival import CensoredSample, as_sample, km_fit

__all__ = ["SyntheticSample", "synthetic_transform"]


@dataclass(frozen=True)
class SyntheticSample:
    sample: CensoredSample
    y_star: np.ndarray

    def __post_init__(self):
        y = np.array(self.y_star, dtype=float).reshape(-1)
        if y.size != self.sample.n:
            raise ValueError("one synthetic response per observation is required")
        y.setflags(write=False)
        object.__setattr__(self, "y_star", y)


def synthetic_transform(sample, g=None, cap: float | None = None) -> SyntheticSample:
    """Inverse-probability-of-censoring transform of the observed times.

    Parameters
    ----------
    sample : CensoredSample or sequence of Observation
    g : StepCdf or ContinuousCdf, optional
        Censoring distribution. Defaults to the product-limit estimate; pass
        the true law to obtain the oracle ``Y*``.
    cap : float, optional
        Clip ``|Y*|`` at this value. Diagnostics only; off by default.
    """
    s = as_sample(sample)
    if s.n == 0:
        raise EmptySampleError()
    if g is None:
        g = km_fit(s, "censoring")
    y = np.zeros(s.n)
    ev = np.flatnonzero(s.delta)
    if ev.size:
        surv = 1.0 - np.atleast_1d(g.value_minus(s.t[ev]))
        if np.any(surv <= 0):
            raise WeightSingularityError()
        y[ev] = s.t[ev] / surv
    if cap is not None:
        y = np.clip(y, -cap, cap)
    return SyntheticSample(s, y)
