"""Heavy-tailed (power-law) traffic marginal.

The density is ``f(x) = (n - 1) a^(n-1) x^(-n)`` for ``x >= a`` and zero
below the cutoff ``a``; its CDF is ``1 - (a/x)^(n-1)``.  Samples come from
the inverse transform ``a * (1 - u)^(-1/(n-1))``; ``n = 3`` gives the familiar
``a / sqrt(1 - u)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_finite_scalar, check_positive, check_random_state
from .exceptions import InvalidArgument

__all__ = [
    "PowerLawParams",
    "TrafficIndices",
    "power_law_sample",
    "power_law_pdf",
    "power_law_cdf",
    "power_law_moments",
    "generate_traffic_series",
]


@dataclass(frozen=True)
class PowerLawParams:
    """Cutoff ``a`` and tail index ``n`` of the traffic density.

    ``n`` must exceed 1 for the density to normalize.  The mean is finite only
    for ``n > 2`` and the variance only for ``n > 3``.
    """

    a: float
    n: float

    def __post_init__(self):
        object.__setattr__(self, "a", check_positive(self.a, "a"))
        n = check_finite_scalar(self.n, "n")
        if n <= 1:
            raise InvalidArgument(f"tail index n must be > 1, got {n}")
        object.__setattr__(self, "n", n)

    @property
    def finite_variance(self) -> bool:
        return self.n > 3


@dataclass(frozen=True)
class TrafficIndices:
    """ON-period and OFF-period tail indices."""

    n0: float
    n1: float

    def __post_init__(self):
        for name in ("n0", "n1"):
            value = check_finite_scalar(getattr(self, name), name)
            if value <= 1:
                raise InvalidArgument(f"{name} must be > 1, got {value}")
            object.__setattr__(self, name, value)

    @property
    def min_index(self) -> float:
        return min(self.n0, self.n1)


def power_law_sample(params: PowerLawParams, u):
    """Map uniform variates ``u`` in (0, 1] to power-law samples.

    Accepts a scalar or an array; the result is strictly increasing in ``u``.
    ``u = 1`` would map to infinity, so it is nudged to the largest double
    below 1.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0) or np.any(arr > 1):
        raise InvalidArgument("uniform variates must lie in (0, 1]")
    arr = np.minimum(arr, np.nextafter(1.0, 0.0))
    out = params.a * (1.0 - arr) ** (-1.0 / (params.n - 1.0))
    return float(out) if out.ndim == 0 else out


def power_law_pdf(params: PowerLawParams, x):
    x = np.asarray(x, dtype=float)
    k = (params.n - 1.0) * params.a ** (params.n - 1.0)
    with np.errstate(divide="ignore"):
        out = np.where(x >= params.a, k * np.abs(x) ** -params.n, 0.0)
    return float(out) if out.ndim == 0 else out


def power_law_cdf(params: PowerLawParams, x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x >= params.a, 1.0 - (params.a / np.maximum(x, params.a)) ** (params.n - 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def power_law_moments(params: PowerLawParams) -> tuple[float, float]:
    """Return ``(mean, variance)``; infinite where the moment diverges."""
    n, a = params.n, params.a
    mean = a * (n - 1.0) / (n - 2.0) if n > 2 else np.inf
    if n > 3:
        variance = a**2 * (n - 1.0) / ((n - 3.0) * (n - 2.0) ** 2)
    else:
        variance = np.inf
    return float(mean), float(variance)


def generate_traffic_series(params: PowerLawParams, count: int, seed=None) -> np.ndarray:
    """Draw ``count`` i.i.d. power-law samples, deterministic per ``seed``."""
    count = check_count(count, "count")
    rng = check_random_state(seed)
    # Generator.random() draws from [0, 1); flip it onto (0, 1]
    u = 1.0 - rng.random(count)
    return power_law_sample(params, u)
