from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Mapping

from .core import (
    ChainState,
    PartitionedTarget,
    ProposalKernel,
    gaussian_random_walk,
    normal_mixture,
    step_target,
    truncated_normal,
    uniform_independent,
    uniform_target,
)
from .errors import ConfigurationError, DomainError
from .updates import DesiredFrequencies, ScheduleState, UpdateRule, deterministic_gamma

logger = logging.getLogger(__name__)

OUTPUT_ENV = "WL_OUT_DIR"

_MISSING = object()

# name -> (builder, parameter defaults); _MISSING marks a required parameter
_TARGETS: Dict[str, tuple[Callable[..., PartitionedTarget], Dict[str, Any]]] = {
    "truncated_normal": (truncated_normal, {"mean": 0.0, "sd": 1.0}),
    "uniform": (uniform_target, {}),
    "normal_mixture": (normal_mixture, {"weights": _MISSING, "means": _MISSING, "sds": _MISSING}),
    "step": (step_target, {"levels": _MISSING}),
}

_PROPOSALS = {"gaussian_rw", "uniform_independent"}
_SCHEDULES = {"deterministic", "flat_histogram"}


@dataclass
class TargetSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TargetSpec":
        if not isinstance(data, Mapping) or "type" not in data:
            raise ConfigurationError("Target definition must contain a 'type' field", field="target.type")
        kind = str(data["type"]).strip().lower()
        if kind not in _TARGETS:
            raise ConfigurationError(
                f"Unsupported target type '{kind}' (known: {', '.join(sorted(_TARGETS))})", field="target.type"
            )
        params = {k: v for k, v in data.items() if k != "type"}
        defaults = _TARGETS[kind][1]
        unknown = sorted(set(params) - set(defaults))
        if unknown:
            raise ConfigurationError(f"Unknown parameter(s) {', '.join(unknown)}", field=f"target.{unknown[0]}")
        return cls(kind=kind, params=params)

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, **self.params}

    def build(self, bin_edges: tuple[float, ...]) -> PartitionedTarget:
        builder, defaults = _TARGETS[self.kind]
        arguments = {**defaults, **self.params}
        missing = [name for name, value in arguments.items() if value is _MISSING]
        if missing:
            raise ConfigurationError(f"Target '{self.kind}' needs '{missing[0]}'", field=f"target.{missing[0]}")
        try:
            return builder(bin_edges, **arguments)
        except TypeError as exc:
            raise ConfigurationError(f"Invalid parameters for target '{self.kind}': {exc}", field="target") from exc


@dataclass
class ProposalSpec:
    kind: str = "gaussian_rw"
    scale: float = 1.0

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProposalSpec":
        if not isinstance(data, Mapping):
            raise ConfigurationError("Proposal must be an object", field="proposal")
        kind = str(data.get("type", "gaussian_rw")).strip().lower()
        if kind not in _PROPOSALS:
            raise ConfigurationError(
                f"Unsupported proposal type '{kind}' (known: {', '.join(sorted(_PROPOSALS))})", field="proposal.type"
            )
        return cls(kind=kind, scale=_number(data, "scale", "proposal.scale", 1.0))

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "scale": self.scale}

    def build(self, target: PartitionedTarget) -> ProposalKernel:
        if self.kind == "gaussian_rw":
            return gaussian_random_walk(self.scale)
        lo, hi = target.support
        return uniform_independent(lo, hi)


@dataclass
class ScheduleSpec:
    kind: str
    alpha: float | None = None
    gamma0: float = 1.0
    gamma_decay: float = 0.5
    c: float = 0.05
    c_decay: float = 1.0
    kappa_max: int | None = None
    min_sweep: int = 1

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScheduleSpec":
        if not isinstance(data, Mapping) or "type" not in data:
            raise ConfigurationError("Schedule definition must contain a 'type' field", field="schedule.type")
        kind = str(data["type"]).strip().lower().replace("-", "_")
        if kind == "fh":
            kind = "flat_histogram"
        if kind not in _SCHEDULES:
            raise ConfigurationError(f"Unsupported schedule type '{kind}'", field="schedule.type")
        if kind == "deterministic":
            return cls(kind=kind, alpha=_number(data, "alpha", "schedule.alpha"))
        kappa_max = data.get("kappa_max")
        return cls(
            kind=kind,
            gamma0=_number(data, "gamma0", "schedule.gamma0", 1.0),
            gamma_decay=_number(data, "gamma_decay", "schedule.gamma_decay", 0.5),
            c=_number(data, "c", "schedule.c", 0.05),
            c_decay=_number(data, "c_decay", "schedule.c_decay", 1.0),
            kappa_max=None if kappa_max is None else _integer(data, "kappa_max", "schedule.kappa_max"),
            min_sweep=_integer(data, "min_sweep", "schedule.min_sweep", 1),
        )

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "deterministic":
            return {"type": self.kind, "alpha": self.alpha}
        return {
            "type": self.kind,
            "gamma0": self.gamma0,
            "gamma_decay": self.gamma_decay,
            "c": self.c,
            "c_decay": self.c_decay,
            "kappa_max": self.kappa_max,
            "min_sweep": self.min_sweep,
        }

    @property
    def initial_gamma(self) -> float:
        return 1.0 if self.kind == "deterministic" else self.gamma0

    def validate(self, d: int) -> None:
        if self.kind == "deterministic":
            deterministic_gamma(1, self.alpha)
            return
        ScheduleState.start(
            d,
            gamma0=self.gamma0,
            gamma_decay=self.gamma_decay,
            c=self.c,
            c_decay=self.c_decay,
            kappa_max=self.kappa_max,
            min_sweep=self.min_sweep,
        )


@dataclass
class ExperimentConfig:
    name: str
    target: TargetSpec
    proposal: ProposalSpec
    bin_edges: tuple[float, ...]
    phi: tuple[float, ...]
    rule: str
    schedule: ScheduleSpec
    iterations: int
    seed: int = 0
    replicas: int = 1
    stride: int = 100
    x0: float | None = None
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigurationError("Experiment configuration must be a JSON object")
        known = {
            "name", "target", "proposal", "bin_edges", "phi", "rule", "schedule",
            "iterations", "seed", "replicas", "stride", "x0", "output_dir", "description",
        }
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown key '{unknown[0]}'", field=unknown[0])
        for key in ("target", "bin_edges", "phi", "rule", "schedule", "iterations"):
            if key not in data:
                raise ConfigurationError(f"Missing required key '{key}'", field=key)

        x0 = data.get("x0")
        output_dir = data.get("output_dir")
        config = cls(
            name=str(data.get("name", "experiment")),
            target=TargetSpec.from_dict(data["target"]),
            proposal=ProposalSpec.from_dict(data.get("proposal", {})),
            bin_edges=_number_tuple(data, "bin_edges"),
            phi=_number_tuple(data, "phi"),
            rule=UpdateRule.from_name(data["rule"]).value,
            schedule=ScheduleSpec.from_dict(data["schedule"]),
            iterations=_integer(data, "iterations", "iterations"),
            seed=_integer(data, "seed", "seed", 0),
            replicas=_integer(data, "replicas", "replicas", 1),
            stride=_integer(data, "stride", "stride", 100),
            x0=None if x0 is None else _number(data, "x0", "x0"),
            output_dir=None if output_dir is None else str(output_dir),
        )
        config.validate()
        return config

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "target": self.target.to_dict(),
            "proposal": self.proposal.to_dict(),
            "bin_edges": list(self.bin_edges),
            "phi": list(self.phi),
            "rule": self.rule,
            "schedule": self.schedule.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "replicas": self.replicas,
            "stride": self.stride,
            "x0": self.x0,
            "output_dir": self.output_dir,
        }
        return data

    def validate(self) -> None:
        """Check every parameter against the preconditions of the code that will consume it."""
        target = self.build_target()
        self.build_proposal(target)
        DesiredFrequencies(self.phi)
        if len(self.phi) != target.d:
            raise ConfigurationError(f"phi has {len(self.phi)} entries but there are {target.d} bins", field="phi")
        self.schedule.validate(target.d)
        UpdateRule.from_name(self.rule).validate(self.phi, self.schedule.initial_gamma)
        for key in ("iterations", "replicas", "stride"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"{key} must be at least 1", field=key)
        if self.x0 is not None:
            try:
                ChainState.at(target, self.x0)
            except DomainError as exc:
                raise ConfigurationError(str(exc), field="x0") from exc

    def build_target(self) -> PartitionedTarget:
        return self.target.build(self.bin_edges)

    def build_proposal(self, target: PartitionedTarget | None = None) -> ProposalKernel:
        return self.proposal.build(target or self.build_target())

    def with_overrides(self, **changes: Any) -> "ExperimentConfig":
        """Copy with CLI overrides applied (``None`` values are ignored) and re-validated."""
        updated = replace(self, **{key: value for key, value in changes.items() if value is not None})
        updated.validate()
        return updated


def load_experiment_config(path: Path) -> ExperimentConfig:
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"Cannot read configuration {source}: {exc.strerror}", field="config") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}, line {exc.lineno}: {exc.msg}", field="config") from exc
    return ExperimentConfig.from_dict(data)


def save_experiment_config(config: ExperimentConfig, path: Path) -> None:
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    destination.write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


def derive_output_dir(config: ExperimentConfig, config_path: Path | None = None, override: Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    if config.output_dir:
        candidate = Path(config.output_dir)
        if not candidate.is_absolute() and config_path is not None:
            candidate = Path(config_path).resolve().parent / candidate
        return candidate
    root = os.environ.get(OUTPUT_ENV)
    if root:
        return Path(root) / config.name
    return Path("output") / config.name


def _number(data: Mapping[str, Any], key: str, path: str, default: Any = _MISSING) -> float:
    if key not in data or data[key] is None:
        if default is _MISSING:
            raise ConfigurationError(f"Missing required value '{key}'", field=path)
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"Expected a number, got {value!r}", field=path)
    return float(value)


def _integer(data: Mapping[str, Any], key: str, path: str, default: Any = _MISSING) -> int:
    if key not in data or data[key] is None:
        if default is _MISSING:
            raise ConfigurationError(f"Missing required value '{key}'", field=path)
        return default
    value = data[key]
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not math.isfinite(value)
        or float(value) != int(value)
    ):
        raise ConfigurationError(f"Expected an integer, got {value!r}", field=path)
    return int(value)


def _number_tuple(data: Mapping[str, Any], key: str) -> tuple[float, ...]:
    values = data[key]
    if not isinstance(values, (list, tuple)):
        raise ConfigurationError("Expected a list of numbers", field=key)
    return tuple(_number({key: value}, key, f"{key}[{index}]") for index, value in enumerate(values))
