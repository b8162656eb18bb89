"""Maximum-likelihood estimation of the OU rate/volatility and the traffic tail index.

Estimators for ``(gamma, sigma)`` from a zero-mean OU trace sampled at a
uniform step ``dt``:

``exact_mle``
    Maximizes the exact Gaussian likelihood (stationary density for ``x_0``
    plus exact transition densities).  The stationary variance is profiled out
    in closed form and the decay factor ``A = exp(-gamma dt)`` is located on a
    log-spaced grid, then refined by root-finding on the analytic score.
``conditional_mle``
    Same search, but drops the ``x_0`` term.  Its maximizer coincides with the
    least-squares AR(1) coefficient, which makes it checkable against
    :func:`ar1_oracle`.
``paper_literal``
    Evaluates the reference stationarity conditions term by term: a quintic in ``A``
    for a given ``sigma`` and a closed-form ``sigma`` for a given ``A``,
    iterated to a fixed point.  That algebra is not the Gaussian score,
    so this path is reported next to ``exact_mle``, never substituted for it.
``ar1_oracle``
    Closed-form least squares; independent of the likelihood code.

The tail index uses ``n_hat = 1 + N / sum(log(x_j / a))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_positive, check_series
from .exceptions import DataError, DivergentEstimate, EstimationDegenerate, InvalidArgument
from .ou import Trace

__all__ = [
    "Method",
    "EstimationResult",
    "ou_log_likelihood",
    "estimate_gamma_sigma",
    "gamma_from_decay",
    "roots_in_unit_interval",
    "paper_literal_coefficients",
    "paper_literal_gamma_root",
    "paper_literal_sigma",
    "estimate_paper_literal",
    "ar1_oracle",
    "estimate_powerlaw_index",
    "estimate_all",
    "OUEstimator",
    "PowerLawIndexEstimator",
]


class Method(str, enum.Enum):
    EXACT_MLE = "exact_mle"
    CONDITIONAL_MLE = "conditional_mle"
    PAPER_LITERAL = "paper_literal"
    AR1_ORACLE = "ar1_oracle"


@dataclass
class EstimationResult:
    gamma_hat: float
    sigma_hat: float
    n_hat: float | None
    log_likelihood: float
    method: Method
    converged: bool
    iterations: int
    gamma_se: float = math.nan
    sigma_se: float = math.nan
    n_se: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["method"] = self.method.value
        return out


def _as_trace(trace, dt=None) -> Trace:
    if isinstance(trace, Trace):
        return trace
    return Trace(1.0 if dt is None else dt, check_series(trace, "trace"))


class _Suff:
    """Sufficient statistics of a zero-mean AR(1) sample."""

    def __init__(self, x):
        self.n = x.size - 1
        self.x0 = float(x[0])
        prev, nxt = x[:-1], x[1:]
        self.sxx = float(prev @ prev)
        self.sxy = float(prev @ nxt)
        self.syy = float(nxt @ nxt)
        self.sum_next = float(nxt.sum())

    def rss(self, a):
        return self.syy - 2.0 * a * self.sxy + a * a * self.sxx


# -- likelihood ----------------------------------------------------------------


def ou_log_likelihood(trace, gamma: float, sigma: float, *, conditional: bool = False) -> float:
    """Exact log-likelihood of a zero-mean OU trace.

    Sums the Gaussian transition log-densities (mean ``exp(-gamma dt) x_{k-1}``,
    variance ``sigma^2 (1 - exp(-2 gamma dt)) / (2 gamma)``) and, unless
    ``conditional``, the stationary log-density of ``x_0``.
    """
    trace = _as_trace(trace)
    if len(trace) < 2:
        raise InvalidArgument("the likelihood needs at least two observations")
    gamma = check_positive(gamma, "gamma")
    sigma = check_positive(sigma, "sigma")
    x = trace.values
    decay = math.exp(-gamma * trace.dt)
    stationary_var = sigma**2 / (2.0 * gamma)
    step_var = stationary_var * -math.expm1(-2.0 * gamma * trace.dt)
    resid = x[1:] - decay * x[:-1]
    ll = -0.5 * resid.size * math.log(2.0 * math.pi * step_var) - 0.5 * float(resid @ resid) / step_var
    if not conditional:
        ll += -0.5 * math.log(2.0 * math.pi * stationary_var) - 0.5 * x[0] ** 2 / stationary_var
    return float(ll)


def gamma_from_decay(decay: float, dt: float) -> float:
    """Map the one-step decay factor ``A`` in (0, 1) to ``gamma = -ln(A)/dt``."""
    if not 0 < decay < 1:
        raise InvalidArgument(f"decay factor must lie in (0, 1), got {decay}")
    return -math.log(decay) / dt


def _profile(s: _Suff, a, conditional):
    """Profile log-likelihood in ``A`` and the profiled stationary variance."""
    a = np.asarray(a, dtype=float)
    one_minus = 1.0 - a * a
    if conditional:
        step_var = s.rss(a) / s.n
        var = step_var / one_minus
        ll = -0.5 * s.n * (np.log(2.0 * np.pi * step_var) + 1.0)
    else:
        var = (s.x0**2 + s.rss(a) / one_minus) / (s.n + 1)
        ll = -0.5 * (s.n + 1) * (np.log(2.0 * np.pi * var) + 1.0) - 0.5 * s.n * np.log(one_minus)
    return ll, var


def _score(s: _Suff, a, conditional):
    d_rss = 2.0 * (a * s.sxx - s.sxy)
    if conditional:
        return -0.5 * s.n * d_rss / s.rss(a)
    one_minus = 1.0 - a * a
    r = s.rss(a) / one_minus
    d_r = d_rss / one_minus + 2.0 * a * s.rss(a) / one_minus**2
    var = (s.x0**2 + r) / (s.n + 1)
    return -0.5 * d_r / var + s.n * a / one_minus


_U_GRID = np.geomspace(1e-9, 50.0, 4000)  # gamma*dt; A = exp(-u)


def _standard_errors(a, n, sigma):
    """Delta-method standard errors of (gamma*dt, sigma) from the AR(1) Fisher information."""
    var_a = (1.0 - a * a) / n
    se_gdt = math.sqrt(var_a) / a
    d_log_sigma = 0.5 * (1.0 / (a * math.log(a)) + 2.0 * a / (1.0 - a * a))
    se_log_sigma = math.sqrt(d_log_sigma**2 * var_a + 0.5 / n)
    return se_gdt, sigma * se_log_sigma


def estimate_gamma_sigma(trace, *, conditional: bool = False, dt: float | None = None) -> EstimationResult:
    """Maximum-likelihood ``(gamma, sigma)`` of a zero-mean OU trace.

    Parameters
    ----------
    trace : Trace or array-like
        At least 10 observations; ``dt`` is taken from the trace (or the
        ``dt`` argument for plain arrays).
    conditional : bool
        Drop the stationary term for ``x_0``.

    Raises
    ------
    EstimationDegenerate
        If the lagged values carry no energy (e.g. an all-zero trace).
    """
    trace = _as_trace(trace, dt)
    if len(trace) < 10:
        raise InvalidArgument(f"estimation needs at least 10 observations, got {len(trace)}")
    s = _Suff(trace.values)
    if s.sxx == 0 or s.syy == 0:
        raise EstimationDegenerate("trace has no variation to estimate gamma/sigma from")
    method = Method.CONDITIONAL_MLE if conditional else Method.EXACT_MLE

    grid_a = np.exp(-_U_GRID)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll_grid, _ = _profile(s, grid_a, conditional)
    ll_grid = np.where(np.isfinite(ll_grid), ll_grid, -np.inf)
    i = int(np.argmax(ll_grid))
    iterations = _U_GRID.size
    # The score at the grid ends decides edge solutions; near A = 0 the
    # profile is flat to round-off and its argmax alone is unreliable.
    if _score(s, grid_a[-1], conditional) <= 0:
        i = _U_GRID.size - 1
    elif _score(s, grid_a[0], conditional) >= 0:
        i = 0
    converged = 0 < i < _U_GRID.size - 1
    diagnostics = {"search": "grid"}
    if converged:
        lo, hi = grid_a[i + 1], grid_a[i - 1]
        f_lo, f_hi = _score(s, lo, conditional), _score(s, hi, conditional)
        if f_lo > 0 > f_hi:
            a_hat, info = brentq(lambda a: _score(s, a, conditional), lo, hi,
                                 xtol=1e-16, rtol=4 * np.finfo(float).eps, full_output=True)
            iterations += info.iterations
            diagnostics["search"] = "grid+score-root"
        else:
            opt = minimize_scalar(lambda a: -float(_profile(s, a, conditional)[0]),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            a_hat = float(opt.x)
            iterations += int(opt.nfev)
            diagnostics["search"] = "grid+bounded-golden"
    else:
        a_hat = float(grid_a[i])
        diagnostics["boundary"] = "A -> 1" if i == 0 else "A -> 0"

    _, var = _profile(s, a_hat, conditional)
    gamma = gamma_from_decay(a_hat, trace.dt)
    sigma = math.sqrt(2.0 * gamma * float(var))
    se_gdt, sigma_se = _standard_errors(a_hat, s.n, sigma) if converged else (math.nan, math.nan)
    diagnostics["decay"] = a_hat
    return EstimationResult(
        gamma, sigma, None,
        ou_log_likelihood(trace, gamma, sigma, conditional=conditional) if sigma > 0 else math.nan,
        method, converged, iterations,
        gamma_se=se_gdt / trace.dt, sigma_se=sigma_se, diagnostics=diagnostics,
    )


# -- reference stationarity conditions -------------------------------------------


def roots_in_unit_interval(coefficients, *, grid_points: int = 10_000, tol: float = 1e-12) -> list[float]:
    """Real roots in (0, 1) of the polynomial with ``coefficients`` (highest power first).

    Sign changes on a uniform grid are bracketed and bisected to width
    ``tol``.  Roots of even multiplicity (no sign change) are only found if
    they fall exactly on a grid node.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    grid = np.linspace(0.0, 1.0, grid_points + 1)
    values = np.polyval(coefficients, grid)
    roots = [float(g) for g, v in zip(grid[1:-1], values[1:-1]) if v == 0.0]
    for j in np.nonzero(values[:-1] * values[1:] < 0)[0]:
        lo, hi, f_lo = grid[j], grid[j + 1], values[j]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            f_mid = np.polyval(coefficients, mid)
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_mid < 0) == (f_lo < 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        root = 0.5 * (lo + hi)
        if 0.0 < root < 1.0:
            roots.append(float(root))
    return sorted(roots)


def paper_literal_coefficients(trace, sigma: float) -> tuple[float, float, float, float, float]:
    """``(C1, .., C5)`` of ``C1 A^5 - C2 A^3 + C3 A^2 + C4 A - C5 = 0``.

    ``C1 = N sigma^4``, ``C2 = 2 C1``, ``C3 = sum x_{k-1}^2``,
    ``C4 = N sigma^4 - C3`` and ``C5 = sigma^2 C3``.
    """
    trace = _as_trace(trace)
    if len(trace) < 2:
        raise InvalidArgument("need at least two observations")
    sigma = check_positive(sigma, "sigma")
    s = _Suff(trace.values)
    c1 = s.n * sigma**4
    c3 = s.sxx
    return c1, 2.0 * c1, c3, c1 - c3, sigma**2 * c3


def paper_literal_gamma_root(trace, sigma: float) -> list[float]:
    """Decay factors ``A`` in (0, 1) solving the reference quintic; possibly empty.

    Map each root to a rate with :func:`gamma_from_decay`.
    """
    c1, c2, c3, c4, c5 = paper_literal_coefficients(trace, sigma)
    return roots_in_unit_interval([c1, 0.0, -c2, c3, c4, -c5])


def paper_literal_sigma(trace, decay: float) -> float | None:
    """Closed-form ``sigma`` for a given ``A``, evaluated term by term.

    ``sigma^2 = [2 x0^2 (1 - A^2) + 2 sum x_k - 2 A sum x_{k-1}^2] / ((N + 1)(1 - A^2))``

    Returns ``None`` when the radicand is negative (no admissible solution).
    """
    if not 0 < decay < 1:
        raise InvalidArgument(f"A must lie in (0, 1), got {decay}")
    trace = _as_trace(trace)
    if len(trace) < 2:
        raise InvalidArgument("need at least two observations")
    s = _Suff(trace.values)
    one_minus = 1.0 - decay * decay
    radicand = (2.0 * s.x0**2 * one_minus + 2.0 * s.sum_next - 2.0 * decay * s.sxx) / ((s.n + 1) * one_minus)
    if radicand < 0:
        return None
    return math.sqrt(radicand)


def estimate_paper_literal(trace, *, tol: float = 1e-10, max_iter: int = 200) -> EstimationResult:
    """Fixed-point iteration between the reference ``A`` and ``sigma`` conditions.

    Starts from the sample standard deviation; at each step picks the quintic
    root closest to the previous ``A`` (initially the lag-1 autocorrelation).
    Stops with ``converged=False`` when the quintic has no root in (0, 1), the
    ``sigma`` condition has no solution, or ``max_iter`` is exhausted.
    """
    trace = _as_trace(trace)
    x = trace.values
    max_iter = check_count(max_iter, "max_iter")
    sigma = float(x.std())
    s = _Suff(x)
    a_prev = min(max(s.sxy / s.sxx, 1e-6), 1 - 1e-6) if s.sxx > 0 else 0.5
    reason = "max_iter reached"
    converged = False
    a = math.nan
    it = 0
    if sigma == 0:
        reason = "zero sample standard deviation"
    else:
        for it in range(1, max_iter + 1):
            roots = paper_literal_gamma_root(trace, sigma)
            if not roots:
                reason = f"quintic has no root in (0, 1) at sigma={sigma!r}"
                break
            a = min(roots, key=lambda r: (abs(r - a_prev), r))
            new_sigma = paper_literal_sigma(trace, a)
            if new_sigma is None or new_sigma == 0:
                reason = f"sigma condition has no positive solution at A={a!r}"
                break
            done = abs(new_sigma - sigma) <= tol * max(1.0, sigma) and abs(a - a_prev) <= tol
            sigma, a_prev = new_sigma, a
            if done:
                converged = True
                reason = "fixed point"
                break
    gamma = -math.log(a) / trace.dt if 0 < a < 1 else math.nan
    sigma_out = sigma if not math.isnan(gamma) else math.nan
    ll = math.nan
    if converged and gamma > 0 and sigma_out > 0:
        ll = ou_log_likelihood(trace, gamma, sigma_out)
    return EstimationResult(gamma, sigma_out, None, ll, Method.PAPER_LITERAL, converged, it,
                            diagnostics={"reason": reason, "decay": a})


def ar1_oracle(trace) -> EstimationResult:
    """Least-squares AR(1) fit mapped to ``(gamma, sigma)``.

    ``A = sum x_k x_{k-1} / sum x_{k-1}^2``; the residual variance ``RSS/N``
    is mapped through ``sigma^2 = 2 gamma s^2 / (1 - A^2)``.
    """
    trace = _as_trace(trace)
    if len(trace) < 3:
        raise InvalidArgument("the AR(1) oracle needs at least three observations")
    x = trace.values
    prev, nxt = x[:-1], x[1:]
    denom = float(np.sum(prev * prev))
    if denom == 0:
        raise EstimationDegenerate("lagged values are all zero")
    a = float(np.sum(nxt * prev)) / denom
    if not 0 < a < 1:
        return EstimationResult(math.nan, math.nan, None, math.nan, Method.AR1_ORACLE, False, 0,
                                diagnostics={"decay": a, "reason": "A outside (0, 1)"})
    gamma = -math.log(a) / trace.dt
    resid = nxt - a * prev
    step_var = float(np.sum(resid * resid)) / resid.size
    sigma = math.sqrt(2.0 * gamma * step_var / (1.0 - a * a))
    ll = ou_log_likelihood(trace, gamma, sigma, conditional=True) if sigma > 0 else math.nan
    se_gdt, sigma_se = _standard_errors(a, resid.size, sigma)
    return EstimationResult(gamma, sigma, None, ll, Method.AR1_ORACLE, True, 0,
                            gamma_se=se_gdt / trace.dt, sigma_se=sigma_se, diagnostics={"decay": a})


# -- tail index -------------------------------------------------------------


def estimate_powerlaw_index(samples, a: float) -> float:
    """``n_hat = 1 + N / sum(log(x_j / a))`` for samples at or above the cutoff."""
    x = check_series(samples, "samples")
    a = check_positive(a, "a")
    if np.any(x < a):
        raise InvalidArgument(f"{int(np.sum(x < a))} samples fall below the cutoff a={a}")
    total = float(np.sum(np.log(x / a)))
    if total == 0:
        raise DivergentEstimate("all samples equal the cutoff; the index estimate diverges")
    return 1.0 + x.size / total


def estimate_all(ou_trace=None, traffic_samples=None, a: float | None = None) -> EstimationResult:
    """Separate estimation of ``(gamma, sigma)`` and ``n``.

    ``ou_trace`` is the OU-attributed trace and ``traffic_samples`` the
    traffic observations above cutoff ``a``.  A failure in one part is
    recorded under ``diagnostics["errors"]`` keyed by the affected parameters
    and the other part is still returned.  If nothing can be estimated the
    error is raised.
    """
    errors = {}
    ou = None
    n_hat = n_se = math.nan
    if ou_trace is not None:
        try:
            ou = estimate_gamma_sigma(ou_trace)
        except DataError as exc:
            errors["gamma,sigma"] = f"{type(exc).__name__}: {exc}"
            first = exc
    if traffic_samples is not None:
        if a is None:
            raise InvalidArgument("the cutoff a is required to estimate n")
        try:
            n_hat = estimate_powerlaw_index(traffic_samples, a)
            n_se = (n_hat - 1.0) / math.sqrt(np.asarray(traffic_samples).size)
        except (DataError, InvalidArgument) as exc:
            errors["n"] = f"{type(exc).__name__}: {exc}"
            if ou is None:
                raise
    if ou is None and math.isnan(n_hat):
        if errors:
            raise first
        raise InvalidArgument("nothing to estimate: supply an OU trace and/or traffic samples")
    if ou is None:
        ou = EstimationResult(math.nan, math.nan, None, math.nan, Method.EXACT_MLE, False, 0)
    ou.n_hat = None if math.isnan(n_hat) else n_hat
    ou.n_se = n_se
    ou.diagnostics["errors"] = errors
    return ou


# -- estimator wrappers ------------------------------------------------------


class OUEstimator(BaseEstimator):
    """Zero-mean OU estimator with an sklearn-style interface.

    Parameters
    ----------
    dt : float
        Sampling step of the observations passed to :meth:`fit`.
    method : {"exact_mle", "conditional_mle", "ar1_oracle", "paper_literal"}
    """

    def __init__(self, dt: float = 1.0, method: str = "exact_mle"):
        self.dt = dt
        self.method = method

    def fit(self, X, y=None):
        trace = X if isinstance(X, Trace) else Trace(self.dt, check_series(X, "X"))
        method = Method(self.method)
        if method is Method.EXACT_MLE:
            result = estimate_gamma_sigma(trace)
        elif method is Method.CONDITIONAL_MLE:
            result = estimate_gamma_sigma(trace, conditional=True)
        elif method is Method.AR1_ORACLE:
            result = ar1_oracle(trace)
        else:
            result = estimate_paper_literal(trace)
        self.result_ = result
        self.gamma_ = result.gamma_hat
        self.sigma_ = result.sigma_hat
        return self

    def score(self, X, y=None):
        """Log-likelihood of ``X`` under the fitted parameters."""
        check_is_fitted(self, "result_")
        trace = X if isinstance(X, Trace) else Trace(self.dt, check_series(X, "X"))
        conditional = Method(self.method) is not Method.EXACT_MLE
        return ou_log_likelihood(trace, self.gamma_, self.sigma_, conditional=conditional)


class PowerLawIndexEstimator(BaseEstimator):
    def __init__(self, cutoff: float = 1.0):
        self.cutoff = cutoff

    def fit(self, X, y=None):
        x = check_series(X, "X")
        self.n_ = estimate_powerlaw_index(x, self.cutoff)
        self.n_se_ = (self.n_ - 1.0) / math.sqrt(x.size)
        return self
