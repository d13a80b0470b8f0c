from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from wang_landau.analysis import (
    FrequencyTrace,
    empirical_limit,
    fh_hitting_stats,
    frequency_trace,
    linear_limit,
    predict_limit,
    replay_z,
    write_hitting_csv,
    write_summary_csv,
    z_over_t,
    z_trajectory,
)
from wang_landau.errors import ConfigurationError, TraceFormatError, UnsupportedError
from wang_landau.traces import FHEvent, TraceConfig, TraceRecorder
from wang_landau.updates import UpdateRule, two_bin_increments


def _trace_from_bins(bins, rule=UpdateRule.LINEAR, phi=(0.75, 0.25), gamma=1.0, events=(), label=""):
    """Trace of a run whose visited bins are given, penalties updated with a fixed gamma."""
    d = len(phi)
    hit, miss = rule.increments(phi, gamma)
    log_theta = [-math.log(d)] * d
    visits = [0] * d
    with TraceRecorder(d, len(bins), TraceConfig(stride=1), label=label) as recorder:
        for t, bin_index in enumerate(bins, start=1):
            visits[bin_index - 1] += 1
            log_theta = [value + (hit[i] if i == bin_index - 1 else miss[i]) for i, value in enumerate(log_theta)]
            recorder.record(t, bin_index, gamma, 0, 0, visits, log_theta)
        for event in events:
            recorder.add_fh_event(*event)
        return recorder.build(log_theta)


def test_predict_limit_linear_is_exact():
    rng = np.random.default_rng(11)
    for _ in range(100):
        phi1 = Fraction(int(rng.integers(1, 1000)), 1000)
        gamma = Fraction(int(rng.integers(1, 1000)), int(rng.integers(1, 1000)))
        prediction = predict_limit(UpdateRule.LINEAR, (phi1, 1 - phi1), gamma)
        assert prediction.first == phi1
        assert prediction.values == (phi1, 1 - phi1)


def test_predict_limit_examples():
    assert predict_limit(UpdateRule.LINEAR, (0.75, 0.25), 1.0).as_array() == pytest.approx([0.75, 0.25])
    wrong = predict_limit(UpdateRule.LOG_FORM, (0.75, 0.25), 1.0)
    assert wrong.formatted() == "0.792071 0.207929"
    expected = math.log(7) / (math.log(5) + math.log(7 / 3))
    assert float(wrong.first) == pytest.approx(expected, abs=1e-12)
    assert abs(float(wrong.first) - 0.75) > 0.04


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.7, 0.9])
def test_logform_keeps_equal_frequencies(gamma):
    prediction = predict_limit(UpdateRule.LOG_FORM, (0.5, 0.5), gamma)
    assert float(prediction.first) == pytest.approx(0.5, abs=1e-12)


def test_predict_limit_matches_two_bin_balance():
    a, b = two_bin_increments(UpdateRule.LOG_FORM, (0.6, 0.4), 0.8)
    prediction = predict_limit(UpdateRule.LOG_FORM, (0.6, 0.4), 0.8)
    assert float(prediction.first) == pytest.approx(b / (a + b))


def test_predict_limit_errors():
    with pytest.raises(UnsupportedError):
        predict_limit(UpdateRule.LINEAR, (0.5, 0.25, 0.25), 1.0)
    with pytest.raises(ConfigurationError):
        predict_limit(UpdateRule.LOG_FORM, (0.75, 0.25), 2.0)


def test_linear_limit_for_many_bins():
    assert linear_limit((0.2, 0.3, 0.5)).values == (0.2, 0.3, 0.5)


def test_frequency_trace_basics():
    single = frequency_trace(_trace_from_bins([1]))
    np.testing.assert_array_equal(single.final, [1.0, 0.0])
    alternating = frequency_trace(_trace_from_bins([1, 2, 1, 2]))
    np.testing.assert_allclose(alternating.final, [0.5, 0.5])
    np.testing.assert_allclose(alternating.frequencies.sum(axis=1), 1.0)
    assert np.all((alternating.frequencies >= 0) & (alternating.frequencies <= 1))


def test_frequency_trace_rejects_inconsistent_rows():
    with pytest.raises(TraceFormatError):
        FrequencyTrace(times=np.array([1, 2]), frequencies=np.array([[1.0, 0.0], [0.7, 0.1]]))


def test_z_trajectory_with_only_bin_one_visits():
    trace = _trace_from_bins([1] * 6, gamma=0.5)
    expected = np.arange(1, 7) * 2 * 0.5 * (1 - 0.75)
    np.testing.assert_allclose(z_trajectory(trace, 1, 2), expected)
    np.testing.assert_allclose(z_trajectory(trace, 2, 1), -expected)


def test_z_trajectory_constant_when_penalties_hold():
    trace = _trace_from_bins([1, 1, 1, 2, 1, 1, 1, 2], phi=(0.75, 0.25))
    # every four visits with three in bin 1 leave Z where it was
    z = z_trajectory(trace, 1, 2)
    assert z[3] == pytest.approx(0.0, abs=1e-12)
    assert z[7] == pytest.approx(0.0, abs=1e-12)


def test_z_trajectory_rejects_bad_bins():
    trace = _trace_from_bins([1, 2])
    with pytest.raises(ConfigurationError):
        z_trajectory(trace, 1, 1)
    with pytest.raises(ConfigurationError):
        z_trajectory(trace, 1, 3)


def test_replay_reproduces_stored_ratios():
    bins = list(np.random.default_rng(3).integers(1, 4, size=500))
    trace = _trace_from_bins(bins, phi=(0.5, 0.3, 0.2), gamma=0.25)
    np.testing.assert_allclose(replay_z(trace, UpdateRule.LINEAR, (0.5, 0.3, 0.2)), trace.z, atol=1e-12)


def test_replay_needs_every_iteration():
    trace = _trace_from_bins([1, 2, 1])
    trace.times = np.array([2, 4, 6])
    with pytest.raises(TraceFormatError):
        replay_z(trace, UpdateRule.LINEAR, (0.75, 0.25))


def test_empirical_limit_uses_second_half():
    trace = _trace_from_bins([2] * 48 + [1, 1, 1, 2] * 24)
    np.testing.assert_allclose(empirical_limit(trace), [0.75, 0.25])
    np.testing.assert_allclose(empirical_limit(trace, burn_in=0.0), [0.5, 0.5])
    with pytest.raises(ConfigurationError):
        empirical_limit(trace, burn_in=1.0)


def test_z_over_t():
    trace = _trace_from_bins([1] * 10, gamma=1.0)
    assert z_over_t(trace) == pytest.approx(0.5)


def test_fh_hitting_stats_pools_waiting_times(caplog):
    traces = [
        _trace_from_bins([1, 2], events=[(1, 100, 1.0, 0.5), (2, 250, 0.5, 0.25)], label="r0"),
        _trace_from_bins([1, 2], events=[(1, 300, 1.0, 0.5)], label="r1"),
        _trace_from_bins([1, 2], label="r2"),
    ]
    with caplog.at_level("WARNING"):
        summary = fh_hitting_stats(traces)
    assert summary.kappas == [2, 1, 0]
    assert summary.min_kappa == 0
    assert summary.zero_fh == ["r2"]
    first = summary.row(1)
    assert (first.replicas, first.mean, first.median, first.max) == (2, 200.0, 200.0, 300.0)
    second = summary.row(2)
    assert (second.replicas, second.mean) == (1, 150.0)
    assert "never met the FH criterion" in caplog.text


def test_fh_hitting_stats_needs_traces():
    with pytest.raises(ConfigurationError):
        fh_hitting_stats([])


def test_summary_and_hitting_csv(tmp_path):
    traces = [
        _trace_from_bins([1, 1, 1, 2] * 10, events=[(1, 12, 1.0, 0.5)]),
        _trace_from_bins([1, 2] * 20, events=[(1, 8, 1.0, 0.5)]),
    ]
    summary_path = tmp_path / "summary.csv"
    write_summary_csv(traces, summary_path, predict_limit(UpdateRule.LINEAR, (0.75, 0.25), 1.0))
    lines = summary_path.read_text(encoding="ascii").splitlines()
    assert lines[0] == "replica,iterations,kappa,freq_1,freq_2,last_half_1,last_half_2,z_over_t,predicted_1,predicted_2"
    assert lines[1].startswith("0,40,1,0.750000,0.250000,0.750000,0.250000,")
    assert lines[2].startswith("1,40,1,0.500000,0.500000,")

    hitting_path = tmp_path / "hitting.csv"
    write_hitting_csv(fh_hitting_stats(traces), hitting_path)
    assert hitting_path.read_text(encoding="ascii").splitlines() == [
        "kappa,replicas,mean_wait,median_wait,max_wait",
        "1,2,10.000000,10.000000,12",
    ]


def test_events_of_a_trace_are_reported_in_order():
    trace = _trace_from_bins([1], events=[(1, 5, 1.0, 0.5)])
    assert trace.fh_events == [FHEvent(1, 5, 1.0, 0.5)]
    assert trace.kappa == 1
