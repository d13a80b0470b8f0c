"""Desk-scale reproductions of the toy experiment and the theory checks at full replica counts."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from wang_landau.analysis import empirical_limit, fh_hitting_stats, predict_limit, z_over_t
from wang_landau.bounding import expected_hitting_time, mc_hitting_time
from wang_landau.cli import random_drift_chains
from wang_landau.experiment import ExperimentConfig, load_experiment_config
from wang_landau.sampler import run_replicas
from wang_landau.updates import UpdateRule

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
PHI = np.array([0.75, 0.25])


def _within(frequencies: np.ndarray, expected: np.ndarray, tolerance: float) -> bool:
    return bool(np.all(np.abs(frequencies - expected) <= tolerance))


def test_linear_update_reaches_the_desired_frequencies():
    config = load_experiment_config(CONFIG_DIR / "toy_linear.json")
    assert (config.iterations, config.replicas) == (200_000, 8)
    traces = run_replicas(config)
    hits = sum(_within(trace.final_frequencies(), PHI, 0.01) for trace in traces)
    assert hits >= 7


def test_logform_update_settles_at_the_wrong_limit():
    config = load_experiment_config(CONFIG_DIR / "toy_logform.json")
    prediction = predict_limit(UpdateRule.LOG_FORM, config.phi, 1.0).as_array()
    assert prediction[0] == pytest.approx(0.7920714025, abs=1e-9)

    traces = run_replicas(config)
    assert all(np.all(trace.gammas == 1.0) for trace in traces)
    assert [trace.kappa for trace in traces] == [0] * 8
    hits = sum(_within(empirical_limit(trace), prediction, 0.01) for trace in traces)
    assert hits >= 7
    assert all(abs(empirical_limit(trace)[0] - 0.75) > 0.02 for trace in traces)


def test_flat_histogram_is_met_again_and_again():
    config = load_experiment_config(CONFIG_DIR / "toy_fh_hitting.json")
    traces = run_replicas(config)
    summary = fh_hitting_stats(traces)
    assert summary.min_kappa >= 20
    assert summary.zero_fh == []
    first = summary.row(1)
    assert first.replicas == 8
    assert first.mean >= config.schedule.min_sweep


def test_fixed_gamma_keeps_z_sublinear():
    data = json.loads((CONFIG_DIR / "toy_linear.json").read_text(encoding="utf-8"))
    data.update(name="fixed_gamma", iterations=100_000, replicas=16, stride=1000)
    data["schedule"]["kappa_max"] = 0
    traces = run_replicas(ExperimentConfig.from_dict(data))
    assert all(np.all(trace.gammas == 1.0) for trace in traces)
    assert np.mean([z_over_t(trace) for trace in traces]) < 0.01


def test_deterministic_schedule_converges():
    config = load_experiment_config(CONFIG_DIR / "toy_deterministic.json")
    traces = run_replicas(config)
    assert all(_within(trace.final_frequencies(), PHI, 0.02) for trace in traces)


def test_first_step_analysis_matches_a_million_replicas():
    rng = np.random.default_rng(2024)
    for k, chain in enumerate(random_drift_chains(10, rng)):
        analytic = expected_hitting_time(chain)
        estimate = mc_hitting_time(chain, 1_000_000, np.random.SeedSequence(2024, spawn_key=(k,)))
        assert estimate.censored == 0
        assert abs(estimate.mean - analytic) < 3 * estimate.se, chain
