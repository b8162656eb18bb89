"""Empirical and closed-form statistics of bandwidth traces.

Three groups live here:

* empirical moments and autocovariance of a trace, with block-bootstrap
  standard errors that stay honest under long-range dependence;
* the model's closed-form mean/variance expressions for individual and
  aggregated bandwidth, evaluated exactly as the model states them;
* Hurst/LRD diagnostics: the tail-index to Hurst map, a least-squares fit of
  the three-term autocovariance model
  ``C1 k^(2(H-1)) + C2 exp(-lambda k) + C3`` and a partial-sum divergence test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import check_count, check_finite_scalar, check_positive, check_random_state, check_series
from .exceptions import FitFailed, InvalidArgument
from .ou import Trace
from .synthesis import BandwidthSpec
from .traffic import TrafficIndices

__all__ = [
    "MomentReport",
    "AcvModelFit",
    "LrdDiagnostic",
    "sample_moments",
    "block_bootstrap",
    "sample_autocovariance",
    "paper_moment_formulas",
    "aggregate_paper_moments",
    "hurst_from_indices",
    "acv_model",
    "fit_acv_model",
    "lrd_diagnostic",
    "AutocovarianceTransformer",
    "AcvModelRegressor",
]


def _as_values(trace, name="trace", min_length=1):
    if isinstance(trace, Trace):
        values = trace.values
        if values.size < min_length:
            raise InvalidArgument(f"{name} needs at least {min_length} samples, got {values.size}")
        return values
    return check_series(trace, name, min_length)


# -- empirical moments -------------------------------------------------------


@dataclass(frozen=True)
class MomentReport:
    mean: float
    variance: float
    count: int
    mean_se: float
    variance_se: float
    block_length: int

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def block_bootstrap(values, *, block_length: int | None = None,
                    n_boot: int = 200, seed=0):
    """Circular moving-block bootstrap of the sample mean and variance.

    Returns an ``(n_boot, 2)`` array of replicate ``(mean, variance)``
    pairs.  Blocks of ``block_length`` (default ``round(N**0.6)``) consecutive
    samples are drawn with replacement, wrapping around the end of the series.
    """
    x = _as_values(values, min_length=2)
    n = x.size
    if block_length is None:
        block_length = max(1, int(round(n**0.6)))
    block_length = check_count(block_length, "block_length")
    block_length = min(block_length, n)
    n_boot = check_count(n_boot, "n_boot", minimum=2)
    rng = check_random_state(seed)

    centered = x - x.mean()
    wrapped = np.concatenate([centered, centered[: block_length - 1]])
    csum = np.concatenate([[0.0], np.cumsum(wrapped)])
    csq = np.concatenate([[0.0], np.cumsum(wrapped**2)])
    n_blocks = -(-n // block_length)
    starts = rng.integers(0, n, size=(n_boot, n_blocks))
    total = (csum[starts + block_length] - csum[starts]).sum(axis=1)
    total_sq = (csq[starts + block_length] - csq[starts]).sum(axis=1)
    m = n_blocks * block_length
    boot_mean = total / m
    boot_var = (total_sq - m * boot_mean**2) / (m - 1)
    return np.column_stack([boot_mean + x.mean(), boot_var])


def sample_moments(trace, *, block_length: int | None = None, n_boot: int = 200, seed=0) -> MomentReport:
    """Unbiased sample mean and variance with block-bootstrap standard errors.

    Plain ``1/sqrt(N)`` errors understate uncertainty for long-range dependent
    data, so both errors come from :func:`block_bootstrap`.
    """
    x = _as_values(trace, min_length=2)
    n = x.size
    if block_length is None:
        block_length = max(1, int(round(n**0.6)))
    mean = float(x.mean())
    variance = float(x.var(ddof=1))
    if np.ptp(x) == 0:
        return MomentReport(float(x[0]), 0.0, n, 0.0, 0.0, block_length)
    reps = block_bootstrap(x, block_length=block_length, n_boot=n_boot, seed=seed)
    return MomentReport(
        mean, variance, n,
        float(reps[:, 0].std(ddof=1)), float(reps[:, 1].std(ddof=1)),
        min(block_length, n),
    )


def sample_autocovariance(trace, max_lag: int) -> np.ndarray:
    """Biased (1/N) sample autocovariance at lags ``0..max_lag``.

    ``max_lag`` must be below a quarter of the trace length.
    """
    x = _as_values(trace, min_length=2)
    max_lag = check_count(max_lag, "max_lag", minimum=0)
    n = x.size
    if max_lag >= n / 4:
        raise InvalidArgument(f"max_lag={max_lag} must be < length/4 = {n / 4}")
    acv = np.zeros(max_lag + 1)
    if np.ptp(x) == 0:
        return acv
    d = x - x.mean()
    for k in range(max_lag + 1):
        acv[k] = np.dot(d[: n - k], d[k:]) / n
    return acv


# -- closed-form model moments ----------------------------------------------


def paper_moment_formulas(spec: BandwidthSpec, traffic_moments, ou_moments) -> tuple[float, float]:
    """Closed-form bandwidth mean and variance as the model writes them.

    ``mean = gamma (E[B] + E[S]) + sigma K'`` and
    ``variance = gamma (Var[B] + Var[S]) + sigma K'``.  These are linear in
    ``gamma`` and ``sigma``; they are evaluated verbatim and not expected to
    match the empirical moments of synthesized traces.
    """
    mean_b, var_b = (float(v) for v in traffic_moments)
    mean_s, var_s = (float(v) for v in ou_moments)
    gamma, sigma, kprime = spec.ou.gamma, spec.ou.sigma, spec.kprime
    mean = gamma * (mean_b + mean_s) + sigma * kprime
    variance = gamma * (var_b + var_s) + sigma * kprime
    return mean, variance


def aggregate_paper_moments(components: Iterable[tuple]) -> tuple[float, float]:
    """Sum :func:`paper_moment_formulas` over ``(spec, traffic_moments, ou_moments)`` triples."""
    components = list(components)
    if not components:
        raise InvalidArgument("aggregate moments need at least one component")
    parts = [paper_moment_formulas(*c) for c in components]
    # fsum keeps N identical components exactly equal to N times one
    return math.fsum(m for m, _ in parts), math.fsum(v for _, v in parts)


def hurst_from_indices(indices: TrafficIndices, epsilon: float = 0.0) -> float:
    """``H = (4 - min(n0, n1)) / 2 + epsilon``.

    ``min(n0, n1)`` must lie in ``(2, 3]`` (3 gives the short-range boundary
    ``H = 1/2``) and ``H`` must land in ``[1/2, 1)``.
    """
    epsilon = check_finite_scalar(epsilon, "epsilon")
    if epsilon < 0:
        raise InvalidArgument(f"epsilon must be >= 0, got {epsilon}")
    low = indices.min_index
    if not 2 < low <= 3:
        raise InvalidArgument(f"min(n0, n1) = {low} must lie in (2, 3]")
    hurst = (4.0 - low) / 2.0 + epsilon
    if not 0.5 <= hurst < 1:
        raise InvalidArgument(f"H = {hurst} must lie in [0.5, 1); reduce epsilon")
    return hurst


# -- autocovariance model fit -----------------------------------------------


def acv_model(lags, c1, c2, c3, lam, hurst):
    lags = np.asarray(lags, dtype=float)
    return c1 * lags ** (2.0 * (hurst - 1.0)) + c2 * np.exp(-lam * lags) + c3


@dataclass(frozen=True)
class AcvModelFit:
    c1: float
    c2: float
    c3: float
    lam: float
    hurst: float
    residual: float
    converged: bool = True
    nfev: int = 0

    def predict(self, lags):
        return acv_model(lags, self.c1, self.c2, self.c3, self.lam, self.hurst)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


_H_EPS = 1e-9


def _linear_coefficients(tau, y, hurst, lam):
    design = np.column_stack([tau ** (2.0 * (hurst - 1.0)), np.exp(-lam * tau), np.ones_like(tau)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return coef, design @ coef - y


def fit_acv_model(acv, dt: float = 1.0, *, max_nfev: int = 2000) -> AcvModelFit:
    """Least-squares fit of ``C1 tau^(2(H-1)) + C2 exp(-lambda tau) + C3``.

    ``acv[k]`` is the autocovariance at lag ``k``; the fit uses lags
    ``1..len(acv)-1`` with ``tau = k * dt``.  For fixed ``(H, lambda)`` the
    model is linear in the three coefficients, so they are eliminated by
    linear least squares and only ``(H, log lambda)`` are searched, from 8
    deterministic starts.  Ties in residual go to the lowest ``H``.

    Raises :class:`FitFailed` (with ``best`` set) if no start converges.
    """
    y_all = np.asarray(acv, dtype=float)
    if y_all.ndim != 1 or y_all.size < 10:
        raise InvalidArgument("fit_acv_model needs a 1-D series of length >= 10")
    y = y_all[1:]
    if not np.all(np.isfinite(y)):
        raise InvalidArgument("acv contains non-finite values at lags >= 1")
    dt = check_positive(dt, "dt")
    tau = dt * np.arange(1, y_all.size)
    scale = max(float(np.max(np.abs(y))), np.finfo(float).tiny)
    ys = y / scale

    lam_lo, lam_hi = 1e-4 / tau[-1], 50.0 / tau[0]
    bounds = ([0.5 + _H_EPS, math.log(lam_lo)], [1.0 - _H_EPS, math.log(lam_hi)])

    def residuals(theta):
        return _linear_coefficients(tau, ys, theta[0], math.exp(theta[1]))[1]

    lam_starts = np.geomspace(2.0 / tau[-1], 2.0 / tau[0], 4)
    starts = [(h, math.log(lam)) for h in (0.6, 0.9) for lam in lam_starts]
    candidates = []
    for start in starts:
        sol = least_squares(residuals, start, bounds=bounds, method="trf", x_scale=[0.1, 1.0],
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
        hurst, lam = float(sol.x[0]), math.exp(sol.x[1])
        coef, res = _linear_coefficients(tau, ys, hurst, lam)
        candidates.append((float(res @ res), hurst, lam, coef * scale, sol.status > 0, sol.nfev))

    best_res = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best_res * (1 + 1e-9) + 1e-300]
    res, hurst, lam, coef, ok, nfev = min(tied, key=lambda c: (c[1], c[0]))
    fit = AcvModelFit(float(coef[0]), float(coef[1]), float(coef[2]), lam, hurst,
                      res * scale**2, ok, nfev)
    if not any(c[4] for c in candidates):
        raise FitFailed("autocovariance model fit did not converge", best=fit)
    return fit


# -- LRD diagnostic ------------------------------------------------------------


@dataclass(frozen=True)
class LrdDiagnostic:
    """Partial-sum and log-log decay diagnostics of an autocovariance series.

    ``diverges`` is the power-law criterion ``exponent > -1``.  ``unreliable``
    flags regression windows whose values change sign (or vanish), where the
    fit runs on ``|acv|`` and says little; ``lrd`` combines both.
    """

    partial_sums: np.ndarray = field(repr=False)
    diverges: bool
    exponent: float
    intercept: float
    unreliable: bool
    lags: np.ndarray = field(repr=False)
    log_lags: np.ndarray = field(repr=False)
    log_abs_acv: np.ndarray = field(repr=False)

    @property
    def hurst(self) -> float:
        return 1.0 + self.exponent / 2.0

    @property
    def lrd(self) -> bool:
        return self.diverges and not self.unreliable


def lrd_diagnostic(acv) -> LrdDiagnostic:
    """Cumulative sums of ``acv[1:]`` and a log-log fit over the upper half of lags."""
    acv = np.asarray(acv, dtype=float)
    if acv.ndim != 1 or acv.size < 32:
        raise InvalidArgument("lrd_diagnostic needs a 1-D series of length >= 32")
    if not np.all(np.isfinite(acv[1:])):
        raise InvalidArgument("acv contains non-finite values at lags >= 1")
    max_lag = acv.size - 1
    partial = np.cumsum(acv[1:])
    lags = np.arange(max(1, max_lag // 2), max_lag + 1)
    window = acv[lags]
    unreliable = not (np.all(window > 0) or np.all(window < 0))
    usable = window != 0
    log_lags = np.log(lags[usable].astype(float))
    log_abs = np.log(np.abs(window[usable]))
    if usable.sum() < 3:
        return LrdDiagnostic(partial, False, math.nan, math.nan, True, lags[usable], log_lags, log_abs)
    slope, intercept = np.polyfit(log_lags, log_abs, 1)
    return LrdDiagnostic(partial, bool(slope > -1.0), float(slope), float(intercept), unreliable,
                         lags[usable], log_lags, log_abs)


# -- estimator wrappers --------------------------------------------------------


class AutocovarianceTransformer(TransformerMixin, BaseEstimator):
    """Map each row of ``X`` (one trace per row) to its sample autocovariance."""

    def __init__(self, max_lag: int = 20):
        self.max_lag = max_lag

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        return np.vstack([sample_autocovariance(row, self.max_lag) for row in X])


class AcvModelRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_acv_model`.

    ``fit(X, y)`` takes ``X`` as consecutive lag indices starting at 0 or 1
    and ``y`` as the autocovariance at those lags; lag 0 never enters the fit.
    """

    def __init__(self, dt: float = 1.0, max_nfev: int = 2000):
        self.dt = dt
        self.max_nfev = max_nfev

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        lags = X[:, 0]
        if X.shape[1] != 1 or lags[0] not in (0.0, 1.0) or np.any(np.diff(lags) != 1):
            raise InvalidArgument("X must be one column of consecutive lags starting at 0 or 1")
        if lags[0] == 1.0:
            y = np.concatenate([[y[0]], y])  # placeholder for lag 0
        self.fit_ = fit_acv_model(y, self.dt, max_nfev=self.max_nfev)
        self.hurst_ = self.fit_.hurst
        self.lambda_ = self.fit_.lam
        self.coef_ = np.array([self.fit_.c1, self.fit_.c2, self.fit_.c3])
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        lags = np.asarray(X, dtype=float).ravel()
        return self.fit_.predict(lags * self.dt)
