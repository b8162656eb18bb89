"""Queue fed by bandwidth: Weibull-like overflow tail and a Lindley simulator.

For a buffer drained at rate ``C`` and fed by self-similar input with Hurst
parameter ``H``, the overflow probability behaves like

    P(V > x) ~ exp(-theta * x^(2 - 2H)),
    theta = ((1 - m)(1 - H) / H)^(2H) / (2 m a (1 - H)^2),

so ``log P`` is linear in ``x^(2-2H)``.  That shape, not the constant, is
what a finite simulation is compared against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_finite_scalar, check_positive, check_series
from .exceptions import InsufficientData, InvalidArgument, UnstableQueue
from .ou import Trace
from .statistics import hurst_from_indices
from .synthesis import BandwidthSpec
from .traffic import TrafficIndices

__all__ = [
    "SIGN_CONVENTION",
    "QueueParams",
    "TailReport",
    "queue_params_from_spec",
    "norros_theta",
    "norros_tail",
    "simulate_queue",
    "default_thresholds",
    "empirical_tail",
    "tail_shape_check",
    "tail_report",
    "LindleyQueue",
]

SIGN_CONVENTION = (
    "theta > 0 and P = exp(-theta * x^(2-2H)); taking the bracketed coefficient "
    "with its own leading minus sign would make P exceed 1"
)


@dataclass(frozen=True)
class QueueParams:
    """``m`` in (0, 1), Hurst ``H`` in [0.5, 1) and variance coefficient ``a > 0``."""

    m: float
    hurst: float
    a: float

    def __post_init__(self):
        m = check_finite_scalar(self.m, "m")
        if m >= 1:
            raise UnstableQueue(f"m = {m} >= 1 leaves no service margin")
        if m <= 0:
            raise InvalidArgument(f"m must be > 0, got {m}")
        hurst = check_finite_scalar(self.hurst, "hurst")
        if not 0.5 <= hurst < 1:
            raise InvalidArgument(f"hurst must lie in [0.5, 1), got {hurst}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "hurst", hurst)
        object.__setattr__(self, "a", check_positive(self.a, "a"))


def queue_params_from_spec(spec: BandwidthSpec, rates, moments, indices: TrafficIndices | None = None) -> QueueParams:
    """Build ``(m, H, a)`` from a bandwidth model.

    ``m = max(1/download_rate, 1/upload_rate)``,
    ``H = (4 - min(n0, n1))/2 + epsilon`` and
    ``a = gamma (Var[B] + Var[S]) + sigma K'``.  ``indices`` defaults to
    ``n0 = n1 = spec.traffic.n``.
    """
    download, upload = (check_positive(r, name) for r, name in zip(rates, ("download_rate", "upload_rate")))
    var_b, var_s = (float(v) for v in moments)
    m = max(1.0 / download, 1.0 / upload)
    if m >= 1:
        raise UnstableQueue(f"m = max(1/{download}, 1/{upload}) = {m} >= 1: the queue is unstable")
    if indices is None:
        indices = TrafficIndices(spec.traffic.n, spec.traffic.n)
    hurst = hurst_from_indices(indices, spec.epsilon)
    a = spec.ou.gamma * (var_b + var_s) + spec.ou.sigma * spec.kprime
    if not math.isfinite(a):
        raise InvalidArgument("the variance coefficient is infinite; supply a finite Var(B)")
    return QueueParams(m, hurst, a)


def norros_theta(params: QueueParams) -> float:
    m, h, a = params.m, params.hurst, params.a
    return ((1.0 - m) * (1.0 - h) / h) ** (2.0 * h) / (2.0 * m * a * (1.0 - h) ** 2)


def norros_tail(params: QueueParams, x):
    """Approximate ``P(V > x)``; accepts a scalar or an array of levels ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise InvalidArgument("buffer levels must be >= 0")
    out = np.exp(-norros_theta(params) * x ** (2.0 - 2.0 * params.hurst))
    return float(out) if out.ndim == 0 else out


def simulate_queue(arrivals: Trace, service_rate: float) -> Trace:
    """Buffer occupancy via ``V_{k+1} = max(0, V_k + arrivals_k - C dt)``, ``V_0 = 0``.

    Returns ``len(arrivals) + 1`` samples on the arrivals' grid.
    """
    if not isinstance(arrivals, Trace):
        raise InvalidArgument("arrivals must be a Trace")
    c = check_positive(service_rate, "service_rate")
    if np.any(arrivals.values < 0):
        raise InvalidArgument("arrivals must be non-negative")
    drained = c * arrivals.dt
    steps = (a - drained for a in arrivals.values.tolist())
    occupancy = np.fromiter(
        itertools.accumulate(steps, lambda v, d: max(0.0, v + d), initial=0.0),
        dtype=float, count=len(arrivals) + 1,
    )
    return Trace(arrivals.dt, occupancy)


@dataclass
class TailReport:
    thresholds: np.ndarray
    probabilities: np.ndarray
    model_probabilities: np.ndarray | None = None
    hurst: float | None = None
    slope: float | None = None
    intercept: float | None = None
    r2: float | None = None
    notes: list = field(default_factory=list)

    def as_dict(self):
        def _list(v):
            return None if v is None else [float(t) for t in v]

        return {
            "thresholds": _list(self.thresholds),
            "probabilities": _list(self.probabilities),
            "model_probabilities": _list(self.model_probabilities),
            "hurst": self.hurst,
            "regression_slope": self.slope,
            "regression_intercept": self.intercept,
            "regression_r2": self.r2,
            "notes": list(self.notes),
        }


def _post_burn_in(occupancy, burn_in):
    values = occupancy.values if isinstance(occupancy, Trace) else check_series(occupancy, "occupancy")
    if not 0 <= burn_in < 1:
        raise InvalidArgument(f"burn_in must lie in [0, 1), got {burn_in}")
    kept = values[int(math.floor(burn_in * values.size)):]
    if kept.size == 0:
        raise InvalidArgument("no samples left after burn-in")
    return kept


def default_thresholds(occupancy, *, count: int = 20, low: float = 0.5, high: float = 0.999,
                       burn_in: float = 0.1) -> np.ndarray:
    """Distinct occupancy quantiles between the ``low`` and ``high`` levels."""
    kept = _post_burn_in(occupancy, burn_in)
    return np.unique(np.quantile(kept, np.linspace(low, high, count)))


def empirical_tail(occupancy, thresholds=None, *, burn_in: float = 0.1) -> TailReport:
    """Fraction of post-burn-in samples strictly above each threshold."""
    kept = _post_burn_in(occupancy, burn_in)
    if thresholds is None:
        thresholds = default_thresholds(occupancy, burn_in=burn_in)
    thresholds = check_series(thresholds, "thresholds")
    if np.any(np.diff(thresholds) <= 0):
        raise InvalidArgument("thresholds must be strictly increasing")
    ordered = np.sort(kept)
    above = kept.size - np.searchsorted(ordered, thresholds, side="right")
    return TailReport(thresholds, above / kept.size)


def tail_shape_check(report: TailReport, hurst: float) -> tuple[float, float, float]:
    """Regress ``log P`` on ``x^(2-2H)`` over thresholds with ``0 < P < 1``.

    Returns ``(slope, intercept, r2)``; a valid tail has a negative slope.
    """
    hurst = check_finite_scalar(hurst, "hurst")
    x = np.asarray(report.thresholds, dtype=float)
    p = np.asarray(report.probabilities, dtype=float)
    usable = (p > 0) & (p < 1) & (x >= 0)
    if usable.sum() < 5:
        raise InsufficientData(f"need at least 5 thresholds with 0 < P < 1, got {int(usable.sum())}")
    u = x[usable] ** (2.0 - 2.0 * hurst)
    y = np.log(p[usable])
    slope, intercept = np.polyfit(u, y, 1)
    fitted = slope * u + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fitted) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def tail_report(occupancy, hurst: float, params: QueueParams | None = None, thresholds=None, *,
                burn_in: float = 0.1) -> TailReport:
    """Empirical tail, optional closed-form tail and the shape regression in one report."""
    report = empirical_tail(occupancy, thresholds, burn_in=burn_in)
    report.hurst = float(hurst)
    if params is not None:
        report.model_probabilities = norros_tail(params, report.thresholds)
        report.notes.append(SIGN_CONVENTION)
    try:
        report.slope, report.intercept, report.r2 = tail_shape_check(report, hurst)
    except InsufficientData as exc:
        report.notes.append(f"shape regression skipped: {exc}")
    return report


class LindleyQueue(TransformerMixin, BaseEstimator):
    """Transformer mapping an arrival series to buffer occupancy."""

    def __init__(self, service_rate: float = 1.0, dt: float = 1.0):
        self.service_rate = service_rate
        self.dt = dt

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        trace = X if isinstance(X, Trace) else Trace(self.dt, check_series(X, "X"))
        return simulate_queue(trace, self.service_rate).values
