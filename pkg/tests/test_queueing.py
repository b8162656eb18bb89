import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from p2pbw.exceptions import InsufficientData, InvalidArgument, UnstableQueue
from p2pbw.ou import Grid, OuParams, Trace
from p2pbw.queueing import (
    LindleyQueue,
    QueueParams,
    TailReport,
    default_thresholds,
    empirical_tail,
    norros_tail,
    norros_theta,
    queue_params_from_spec,
    simulate_queue,
    tail_report,
    tail_shape_check,
)
from p2pbw.synthesis import BandwidthSpec
from p2pbw.traffic import PowerLawParams


def spec(n=2.5, gamma=1.0, sigma=0.0, kprime=0.0, epsilon=0.0):
    return BandwidthSpec(PowerLawParams(1.0, n), OuParams(gamma, 0.0, sigma), Grid(0.1, 10),
                         kprime=kprime, epsilon=epsilon)


def brute_force_supremum(arrivals, drained):
    """V(t) = max over s <= t of (A(t) - A(s) - C (t - s)), straight from the definition."""
    cumulative = [0.0]
    for a in arrivals:
        cumulative.append(cumulative[-1] + a)
    return [max(cumulative[t] - cumulative[s] - drained * (t - s) for s in range(t + 1))
            for t in range(len(cumulative))]


# -- parameters ------------------------------------------------------------------


def test_params_from_spec_examples():
    params = queue_params_from_spec(spec(), (2.0, 4.0), (2.0, 1.0))
    assert params.m == 0.5
    assert params.hurst == 0.75
    assert params.a == 3.0
    assert queue_params_from_spec(spec(sigma=2.0, kprime=0.25), (2.0, 4.0), (2.0, 1.0)).a == 3.5


def test_unstable_parameters():
    with pytest.raises(UnstableQueue):
        queue_params_from_spec(spec(), (1.0, 4.0), (2.0, 1.0))
    with pytest.raises(UnstableQueue):
        QueueParams(1.2, 0.75, 1.0)
    with pytest.raises(InvalidArgument):
        QueueParams(0.5, 1.0, 1.0)
    with pytest.raises(InvalidArgument):
        QueueParams(0.5, 0.75, 0.0)


def test_unstable_is_a_usage_error():
    assert UnstableQueue("x").exit_code == 1


# -- closed-form tail ----------------------------------------------------------------


def test_tail_at_zero_is_one():
    assert norros_tail(QueueParams(0.5, 0.75, 1.0), 0.0) == 1.0


def test_tail_value_against_independent_theta():
    m, a, h, x = 0.5, 1.0, 0.75, 10.0
    theta = (1 / (2 * 0.5 * 1 * 0.0625)) * ((0.5 * 0.25) / 0.75) ** 1.5
    assert norros_theta(QueueParams(m, h, a)) == pytest.approx(theta, rel=1e-14)
    assert norros_tail(QueueParams(m, h, a), x) == pytest.approx(math.exp(-theta * math.sqrt(10)), rel=1e-14)


def test_half_hurst_gives_exponential_tail():
    params = QueueParams(0.4, 0.5, 2.0)
    x = np.linspace(0, 20, 9)
    logp = np.log(norros_tail(params, x))
    np.testing.assert_allclose(np.diff(logp, 2), 0.0, atol=1e-12)


@given(m=st.floats(0.05, 0.95), a=st.floats(0.1, 10), h=st.floats(0.5, 0.98), x=st.floats(0, 100),
       dx=st.floats(0.01, 10))
def test_tail_decreasing_and_bounded(m, a, h, x, dx):
    params = QueueParams(m, h, a)
    p, q = norros_tail(params, x), norros_tail(params, x + dx)
    assert 0 <= q <= p <= 1
    assert norros_theta(params) > 0


def test_heavier_tail_for_larger_hurst():
    for m in (0.2, 0.5, 0.8):
        for a in (0.5, 1.0, 5.0):
            for x in (2.0, 10.0, 50.0):
                probs = [norros_tail(QueueParams(m, h, a), x) for h in (0.55, 0.65, 0.75, 0.85)]
                assert all(p < q for p, q in zip(probs, probs[1:]))


def test_tail_rejects_negative_levels():
    with pytest.raises(InvalidArgument):
        norros_tail(QueueParams(0.5, 0.75, 1.0), -1.0)


# -- Lindley recursion ---------------------------------------------------------------


def test_underload_stays_empty():
    out = simulate_queue(Trace(1.0, np.full(100, 0.7)), 1.0)
    assert not np.any(out.values)


def test_hand_computed_steps():
    np.testing.assert_array_equal(simulate_queue(Trace(1.0, [3.0, 0.0, 0.0]), 1.0).values, [0, 2, 1, 0])


def test_rejects_negative_arrivals():
    with pytest.raises(InvalidArgument):
        simulate_queue(Trace(1.0, [1.0, -0.5]), 1.0)
    with pytest.raises(InvalidArgument):
        simulate_queue(Trace(1.0, [1.0]), 0.0)


def test_lindley_equals_supremum_on_random_suite():
    rng = np.random.default_rng(2718)
    for _ in range(100):
        length = int(rng.integers(1, 21))
        # integer arrivals and service keep both routes exact in floating point
        arrivals = rng.integers(0, 6, size=length).astype(float)
        drained = float(rng.integers(1, 5))
        got = simulate_queue(Trace(1.0, arrivals), drained).values
        assert got.tolist() == brute_force_supremum(arrivals.tolist(), drained)


@given(arrivals=st.lists(st.integers(0, 50), min_size=1, max_size=20), drained=st.integers(1, 30))
def test_lindley_equals_supremum_property(arrivals, drained):
    got = simulate_queue(Trace(1.0, np.array(arrivals, dtype=float)), float(drained)).values
    assert got.tolist() == brute_force_supremum([float(a) for a in arrivals], float(drained))


@given(arrivals=st.lists(st.floats(0, 10), min_size=1, max_size=40), c=st.floats(0.1, 5), extra=st.floats(0, 5))
def test_occupancy_non_negative_and_monotone_in_service(arrivals, c, extra):
    trace = Trace(0.5, arrivals)
    slow = simulate_queue(trace, c).values
    fast = simulate_queue(trace, c + extra).values
    assert np.all(slow >= 0)
    assert np.all(fast <= slow)


def test_stable_queue_mean_bounded_over_doubling_horizons():
    rng = np.random.default_rng(5)
    arrivals = rng.exponential(0.8, 400_000)
    means = [simulate_queue(Trace(1.0, arrivals[:n]), 1.0).values.mean() for n in (100_000, 200_000, 400_000)]
    assert max(means) < 2 * min(means)


def test_lindley_transformer():
    out = LindleyQueue(service_rate=1.0, dt=1.0).fit_transform([3.0, 0.0, 0.0])
    np.testing.assert_array_equal(out, [0, 2, 1, 0])


# -- empirical tail and shape check -----------------------------------------------------


def test_zero_occupancy_tail():
    report = empirical_tail(np.zeros(100), [0.5, 1.0, 2.0])
    np.testing.assert_array_equal(report.probabilities, [0, 0, 0])


def test_counting_example():
    report = empirical_tail(np.array([1.0, 2.0, 3.0, 4.0]), [0.0, 2.0])
    np.testing.assert_array_equal(report.probabilities, [1.0, 0.5])


def test_burn_in_discards_prefix():
    occupancy = np.array([100.0] * 10 + [1.0] * 90)
    assert empirical_tail(occupancy, [50.0]).probabilities[0] == 0.0
    assert empirical_tail(occupancy, [50.0], burn_in=0.0).probabilities[0] == pytest.approx(0.1)
    with pytest.raises(InvalidArgument):
        empirical_tail(occupancy, [1.0], burn_in=1.0)


def test_thresholds_must_increase():
    with pytest.raises(InvalidArgument):
        empirical_tail(np.arange(10.0), [2.0, 1.0])


@given(values=st.lists(st.floats(0, 100), min_size=10, max_size=200))
def test_tail_is_monotone(values):
    report = empirical_tail(np.array(values))
    p = report.probabilities
    assert np.all(np.diff(p) <= 0)
    assert np.all((p >= 0) & (p <= 1))


def test_default_thresholds_are_quantiles():
    occ = np.arange(1000.0)
    th = default_thresholds(occ)
    kept = occ[100:]
    assert th[0] == pytest.approx(np.quantile(kept, 0.5))
    assert th[-1] == pytest.approx(np.quantile(kept, 0.999))
    assert th.size == 20


def test_shape_check_on_exact_weibull_tail():
    x = np.linspace(1, 100, 30)
    report = TailReport(x, np.exp(-0.3 * x**0.5))
    slope, intercept, r2 = tail_shape_check(report, 0.75)
    assert slope == pytest.approx(-0.3, rel=1e-10)
    assert intercept == pytest.approx(0.0, abs=1e-10)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_shape_check_half_hurst_is_plain_regression():
    x = np.linspace(1, 30, 12)
    p = np.exp(-0.2 * x) * (1 + 0.01 * np.sin(x))
    slope, intercept, _ = tail_shape_check(TailReport(x, p), 0.5)
    ref = np.polyfit(x, np.log(p), 1)
    assert slope == pytest.approx(ref[0]) and intercept == pytest.approx(ref[1])


def test_shape_check_needs_five_points():
    with pytest.raises(InsufficientData):
        tail_shape_check(TailReport(np.arange(1.0, 7.0), np.array([1, 0.5, 0.2, 0.1, 0, 0])), 0.75)


def test_tail_report_with_model():
    occ = np.random.default_rng(0).exponential(2.0, 5000)
    params = QueueParams(0.5, 0.75, 1.0)
    report = tail_report(occ, 0.75, params)
    np.testing.assert_allclose(report.model_probabilities, norros_tail(params, report.thresholds))
    assert report.slope < 0
    assert any("theta > 0" in note for note in report.notes)
    d = report.as_dict()
    assert {"regression_slope", "regression_r2", "thresholds"} <= set(d)


def test_tail_report_notes_skipped_regression():
    report = tail_report(np.zeros(100), 0.75)
    assert report.slope is None
    assert any("skipped" in note for note in report.notes)


def test_fgn_helper_has_target_autocovariance():
    from _fgn import fgn, fgn_autocovariance

    x = fgn(200_000, 0.75, np.random.default_rng(3))
    assert x.var() == pytest.approx(1.0, rel=0.05)
    lag1 = np.mean(x[1:] * x[:-1]) / x.var()
    assert lag1 == pytest.approx(fgn_autocovariance(0.75, 1), abs=0.02)
    assert fgn_autocovariance(0.75, 1) == pytest.approx(2 ** 0.5 - 1)
