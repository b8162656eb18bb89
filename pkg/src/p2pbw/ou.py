"""Ornstein-Uhlenbeck peer process: exact simulation and stationary moments.

The process follows ``dS = gamma * (mu - S) dt + sigma dW``.  Paths are
generated with the exact Gaussian transition over each grid step, so there is
no discretization bias regardless of ``dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from ._validation import (
    check_count,
    check_finite_scalar,
    check_nonnegative,
    check_positive,
    check_random_state,
    check_series,
)
from .exceptions import InvalidArgument

__all__ = [
    "OuParams",
    "Grid",
    "Trace",
    "ou_exact_step",
    "ou_generate_path",
    "ou_stationary_moments",
    "ou_stationary_autocovariance",
]


@dataclass(frozen=True)
class OuParams:
    """Parameters of the OU process.

    Parameters
    ----------
    gamma : float
        Mean-reversion rate (1/time), strictly positive.
    mu : float
        Long-run mean.
    sigma : float
        Volatility, non-negative.
    s0 : float
        Initial value of the path.
    """

    gamma: float
    mu: float = 0.0
    sigma: float = 1.0
    s0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", check_positive(self.gamma, "gamma"))
        object.__setattr__(self, "mu", check_finite_scalar(self.mu, "mu"))
        object.__setattr__(self, "sigma", check_nonnegative(self.sigma, "sigma"))
        object.__setattr__(self, "s0", check_finite_scalar(self.s0, "s0"))


@dataclass(frozen=True)
class Grid:
    """Uniform time grid of ``count`` steps of width ``dt``."""

    dt: float
    count: int

    def __post_init__(self):
        object.__setattr__(self, "dt", check_positive(self.dt, "dt"))
        object.__setattr__(self, "count", check_count(self.count, "count"))

    @property
    def horizon(self) -> float:
        return self.dt * self.count


@dataclass(frozen=True, eq=False)
class Trace:
    """Uniformly sampled time series ``values[k]`` observed at ``k * dt``."""

    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dt", check_positive(self.dt, "dt"))
        values = np.array(check_series(self.values, "trace values"), dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Trace(dt={self.dt!r}, length={self.values.size})"

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)

    def tail(self, fraction: float) -> "Trace":
        """Drop the leading ``fraction`` of samples (burn-in)."""
        if not 0 <= fraction < 1:
            raise InvalidArgument(f"burn-in fraction must lie in [0, 1), got {fraction}")
        start = int(math.floor(fraction * self.values.size))
        return Trace(self.dt, self.values[start:])


def _transition(params: OuParams, dt: float) -> tuple[float, float]:
    """Return (decay factor exp(-gamma dt), conditional standard deviation)."""
    decay = math.exp(-params.gamma * dt)
    # -expm1(-2x) keeps precision when gamma*dt is tiny
    var = params.sigma**2 * -math.expm1(-2.0 * params.gamma * dt) / (2.0 * params.gamma)
    return decay, math.sqrt(var)


def ou_exact_step(current: float, params: OuParams, dt: float, z: float) -> float:
    """Advance the process by ``dt`` using the standard normal variate ``z``.

    The conditional law of the result is Gaussian with mean
    ``current * e^{-gamma dt} + mu * (1 - e^{-gamma dt})`` and variance
    ``sigma^2 (1 - e^{-2 gamma dt}) / (2 gamma)``.
    """
    current = check_finite_scalar(current, "current")
    dt = check_positive(dt, "dt")
    z = check_finite_scalar(z, "z")
    decay, sd = _transition(params, dt)
    return current * decay + params.mu * (1.0 - decay) + sd * z


def ou_generate_path(params: OuParams, grid: Grid, seed=None) -> Trace:
    """Simulate ``grid.count`` exact steps starting from ``params.s0``.

    Returns a trace of ``grid.count + 1`` samples; the first is ``s0``.
    Identical ``seed`` values give bit-identical traces.
    """
    rng = check_random_state(seed)
    z = rng.standard_normal(grid.count)
    decay, sd = _transition(params, grid.dt)
    # deviation from mu is an AR(1) recursion y_k = decay * y_{k-1} + sd * z_k
    deviation = lfilter([1.0], [1.0, -decay], sd * z, zi=[decay * (params.s0 - params.mu)])[0]
    values = np.empty(grid.count + 1)
    values[0] = params.s0
    values[1:] = params.mu + deviation
    return Trace(grid.dt, values)


def ou_stationary_moments(params: OuParams) -> tuple[float, float]:
    """Long-run ``(mean, variance) = (mu, sigma^2 / (2 gamma))``."""
    return params.mu, params.sigma**2 / (2.0 * params.gamma)


def ou_stationary_autocovariance(params: OuParams, lag) -> float | np.ndarray:
    """Stationary autocovariance ``sigma^2/(2 gamma) * exp(-gamma |lag|)``.

    ``lag`` is measured in time units and may be an array.
    """
    lag = np.asarray(lag, dtype=float)
    if np.any(np.isnan(lag)):
        raise InvalidArgument("lag must not be NaN")
    _, variance = ou_stationary_moments(params)
    out = variance * np.exp(-params.gamma * np.abs(lag))
    return float(out) if out.ndim == 0 else out
