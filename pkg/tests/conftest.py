from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

from wang_landau.core import gaussian_random_walk, truncated_normal

TOY_EDGES = (-10.0, 0.0, 10.0)
TOY_PHI = (0.75, 0.25)


@pytest.fixture
def toy_target():
    return truncated_normal(TOY_EDGES)


@pytest.fixture
def toy_proposal():
    return gaussian_random_walk(1.0)


@pytest.fixture
def toy_config_data() -> dict[str, Any]:
    return {
        "name": "tiny",
        "target": {"type": "truncated_normal", "mean": 0.0, "sd": 1.0},
        "proposal": {"type": "gaussian_rw", "scale": 1.0},
        "bin_edges": list(TOY_EDGES),
        "phi": list(TOY_PHI),
        "rule": "linear",
        "schedule": {"type": "flat_histogram", "gamma0": 1.0, "gamma_decay": 0.5, "c": 0.05, "min_sweep": 50},
        "iterations": 2000,
        "seed": 11,
        "replicas": 2,
        "stride": 10,
        "x0": 0.0,
    }


@pytest.fixture
def write_config(tmp_path: Path):
    def _write(data: dict[str, Any], name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path

    return _write
