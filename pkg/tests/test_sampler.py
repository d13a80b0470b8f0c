from __future__ import annotations

import math

import numpy as np
import pytest

from wang_landau.analysis import reconstruction_error
from wang_landau.errors import ConfigurationError, NumericalError
from wang_landau.experiment import ExperimentConfig
from wang_landau.sampler import replica_seed, run_configured, run_replicas, run_wl_deterministic, run_wl_fh
from wang_landau.traces import TraceConfig
from wang_landau.updates import UpdateRule

PHI = (0.75, 0.25)


def _fh_run(target, proposal, **overrides):
    arguments = {
        "rule": UpdateRule.LINEAR,
        "phi": PHI,
        "gamma0": 1.0,
        "gamma_decay": 0.5,
        "c": 0.05,
        "iterations": 5000,
        "seed": 17,
        "trace": TraceConfig(stride=1),
        "x0": 0.0,
        "min_sweep": 100,
    }
    arguments.update(overrides)
    return run_wl_fh(target, proposal, **arguments)


def test_zero_iterations_is_a_configuration_error(toy_target, toy_proposal):
    with pytest.raises(ConfigurationError) as excinfo:
        run_wl_deterministic(toy_target, toy_proposal, UpdateRule.LINEAR, PHI, 0.6, 0, seed=1)
    assert excinfo.value.field == "iterations"


def test_deterministic_run_rejects_bad_alpha(toy_target, toy_proposal):
    with pytest.raises(ConfigurationError):
        run_wl_deterministic(toy_target, toy_proposal, UpdateRule.LINEAR, PHI, 0.4, 100, seed=1)


def test_phi_length_must_match_bins(toy_target, toy_proposal):
    with pytest.raises(ConfigurationError):
        _fh_run(toy_target, toy_proposal, phi=(0.5, 0.25, 0.25))


def test_same_seed_gives_identical_traces(toy_target, toy_proposal):
    first = _fh_run(toy_target, toy_proposal, trace=TraceConfig(stride=13))
    second = _fh_run(toy_target, toy_proposal, trace=TraceConfig(stride=13))
    for name in ("times", "bins", "gammas", "kappas", "fh_flags", "visits", "z"):
        np.testing.assert_array_equal(getattr(first, name), getattr(second, name))
    assert first.fh_events == second.fh_events


def test_different_seeds_give_different_paths(toy_target, toy_proposal):
    first = _fh_run(toy_target, toy_proposal, seed=1)
    second = _fh_run(toy_target, toy_proposal, seed=2)
    assert not np.array_equal(first.bins, second.bins)


@pytest.mark.parametrize("rule", [UpdateRule.LINEAR, UpdateRule.LOG_FORM])
def test_fh_trace_replays_exactly(toy_target, toy_proposal, rule):
    trace = _fh_run(toy_target, toy_proposal, rule=rule, gamma0=0.5)
    assert reconstruction_error(trace, rule, PHI) < 1e-9


def test_deterministic_trace_replays_exactly(toy_target, toy_proposal):
    trace = run_wl_deterministic(
        toy_target, toy_proposal, UpdateRule.LINEAR, PHI, 0.6, 3000, seed=5, trace=TraceConfig(stride=1), x0=0.0
    )
    np.testing.assert_allclose(trace.gammas, np.arange(1, 3001, dtype=float) ** -0.6)
    assert reconstruction_error(trace, UpdateRule.LINEAR, PHI) < 1e-9


def test_visit_counts_add_up(toy_target, toy_proposal):
    trace = _fh_run(toy_target, toy_proposal, trace=TraceConfig(stride=100), iterations=1050)
    np.testing.assert_array_equal(trace.visits.sum(axis=1), trace.times)
    assert list(trace.times[-2:]) == [1000, 1050]


def test_gamma_drops_exactly_at_fh_events(toy_target, toy_proposal):
    trace = _fh_run(toy_target, toy_proposal)
    assert trace.kappa >= 1
    assert int(trace.fh_flags.sum()) == trace.kappa
    steps = np.diff(trace.gammas)
    assert np.all(steps <= 0)
    np.testing.assert_array_equal(steps < 0, trace.fh_flags[1:] == 1)
    assert [event.kappa for event in trace.fh_events] == list(range(1, trace.kappa + 1))
    for event in trace.fh_events:
        assert event.gamma_after == pytest.approx(0.5 * event.gamma_before)
        assert trace.fh_flags[event.t_global - 1] == 1


def test_fh_waits_for_min_sweep(toy_target, toy_proposal):
    trace = _fh_run(toy_target, toy_proposal, min_sweep=400)
    previous = 0
    for event in trace.fh_events:
        assert event.t_global - previous >= 400
        previous = event.t_global


def test_kappa_cap_pins_gamma(toy_target, toy_proposal):
    trace = _fh_run(toy_target, toy_proposal, kappa_max=0, gamma0=1.0)
    assert np.all(trace.gammas == 1.0)


def test_degenerate_threshold_warns(toy_target, toy_proposal, caplog):
    with caplog.at_level("WARNING"):
        _fh_run(toy_target, toy_proposal, c=0.3, min_sweep=1, iterations=50)
    assert "single visit" in caplog.text


def test_logform_with_equal_frequencies_reaches_flat_histograms(toy_target, toy_proposal):
    trace = _fh_run(
        toy_target, toy_proposal, rule=UpdateRule.LOG_FORM, phi=(0.5, 0.5), gamma0=0.5,
        iterations=20_000, trace=TraceConfig(stride=100),
    )
    assert trace.kappa >= 1
    assert trace.final_frequencies()[0] == pytest.approx(0.5, abs=0.05)


def test_non_finite_penalties_raise_and_flush(tmp_path, toy_target, toy_proposal, monkeypatch):
    def broken(self, phi, gamma):
        return (math.inf, math.inf), (-math.inf, -math.inf)

    monkeypatch.setattr(UpdateRule, "increments", broken)
    path = tmp_path / "trace.csv"
    with pytest.raises(NumericalError):
        _fh_run(toy_target, toy_proposal, trace=TraceConfig(stride=1, trace_path=path))
    assert path.read_text(encoding="ascii").startswith("t,bin,gamma")


def test_replica_seed_is_stable():
    first = np.random.default_rng(replica_seed(2024, 3)).random(4)
    second = np.random.default_rng(replica_seed(2024, 3)).random(4)
    other = np.random.default_rng(replica_seed(2024, 4)).random(4)
    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, other)


def test_replicas_do_not_depend_on_replica_count(toy_config_data):
    small = ExperimentConfig.from_dict(toy_config_data)
    large = small.with_overrides(replicas=3)
    two = run_replicas(small, workers=1)
    three = run_replicas(large, workers=1)
    assert len(two) == 2 and len(three) == 3
    for left, right in zip(two, three):
        np.testing.assert_array_equal(left.z, right.z)
    assert [trace.label for trace in three] == ["replica_0", "replica_1", "replica_2"]


def test_process_pool_matches_sequential_run(toy_config_data):
    config = ExperimentConfig.from_dict(toy_config_data)
    pooled = run_replicas(config, workers=2)
    for k, trace in enumerate(pooled):
        np.testing.assert_array_equal(trace.z, run_configured(config, k).z)


def test_run_replicas_needs_one_trace_config_per_replica(toy_config_data):
    config = ExperimentConfig.from_dict(toy_config_data)
    with pytest.raises(ConfigurationError):
        run_replicas(config, traces=[None], workers=1)
