from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .core import PenaltyState
from .errors import ConfigurationError

logger = logging.getLogger(__name__)

Number = Union[float, Fraction]


class UpdateRule(str, Enum):
    """Penalty update f(indicator, phi_i, gamma) added to log theta(i) after each draw."""

    LINEAR = "linear"
    LOG_FORM = "logform"

    @classmethod
    def from_name(cls, value: "str | UpdateRule") -> "UpdateRule":
        if isinstance(value, UpdateRule):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        if key in {"linear", "lin", "1", "eq1"}:
            return cls.LINEAR
        if key in {"logform", "log", "2", "eq2"}:
            return cls.LOG_FORM
        raise ConfigurationError(f"Unknown update rule '{value}' (use 'linear' or 'logform')", field="rule")

    def f(self, indicator: int, phi_i: Number, gamma: Number) -> Number:
        step = gamma * (indicator - phi_i)
        if self is UpdateRule.LINEAR:
            return step
        return math.log1p(float(step))

    def validate(self, phi: Sequence[Number], gamma: Number) -> None:
        if not gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {gamma}", field="gamma")
        if self is UpdateRule.LOG_FORM:
            bound = float(gamma) * max(max(float(p), 1.0 - float(p)) for p in phi)
            if bound >= 1.0:
                raise ConfigurationError(
                    f"logform update needs gamma * max(phi_i, 1 - phi_i) < 1, got {bound:.6g}",
                    field="gamma",
                )

    def increments(self, phi: Sequence[float], gamma: float) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """Per-bin increments when the bin is visited (hit) and when it is not (miss)."""
        self.validate(phi, gamma)
        hit = tuple(float(self.f(1, p, gamma)) for p in phi)
        miss = tuple(float(self.f(0, p, gamma)) for p in phi)
        return hit, miss


@dataclass(frozen=True)
class DesiredFrequencies:
    phi: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(p) for p in self.phi)
        if len(values) < 2:
            raise ConfigurationError("At least two desired frequencies are required", field="phi")
        if any(not 0.0 < p < 1.0 for p in values):
            raise ConfigurationError("Desired frequencies must lie strictly between 0 and 1", field="phi")
        if abs(math.fsum(values) - 1.0) > 1e-12:
            raise ConfigurationError(f"Desired frequencies must sum to 1, got {math.fsum(values)!r}", field="phi")
        object.__setattr__(self, "phi", values)

    @property
    def d(self) -> int:
        return len(self.phi)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.phi)


@dataclass(slots=True)
class ScheduleState:
    """Flat-histogram bookkeeping: gamma_kappa, kappa, visits since the last reset and threshold c."""

    gamma: float
    kappa: int
    nu: list[int]
    t_since_reset: int
    c: float
    gamma0: float = 1.0
    gamma_decay: float = 0.5
    kappa_max: int | None = None
    c0: float = 0.0
    c_decay: float = 1.0
    min_sweep: int = 1
    history: list[tuple[int, int, float, float]] = field(default_factory=list)

    @classmethod
    def start(
        cls,
        d: int,
        gamma0: float,
        gamma_decay: float,
        c: float,
        c_decay: float = 1.0,
        kappa_max: int | None = None,
        min_sweep: int = 1,
    ) -> "ScheduleState":
        if not gamma0 > 0:
            raise ConfigurationError("gamma0 must be positive", field="schedule.gamma0")
        if not 0.0 < gamma_decay < 1.0:
            raise ConfigurationError("gamma_decay must lie in (0, 1)", field="schedule.gamma_decay")
        if not c > 0:
            raise ConfigurationError("FH threshold c must be positive", field="schedule.c")
        if not 0.0 < c_decay <= 1.0:
            raise ConfigurationError("c_decay must lie in (0, 1]", field="schedule.c_decay")
        if kappa_max is not None and kappa_max < 0:
            raise ConfigurationError("kappa_max must be nonnegative", field="schedule.kappa_max")
        if min_sweep < 1:
            raise ConfigurationError("min_sweep must be at least 1", field="schedule.min_sweep")
        return cls(
            gamma=gamma_schedule(0, gamma0, gamma_decay, kappa_max),
            kappa=0,
            nu=[0] * d,
            t_since_reset=0,
            c=c,
            gamma0=gamma0,
            gamma_decay=gamma_decay,
            kappa_max=kappa_max,
            c0=c,
            c_decay=c_decay,
            min_sweep=min_sweep,
        )

    def record_visit(self, bin_index: int) -> None:
        self.nu[bin_index - 1] += 1
        self.t_since_reset += 1

    def flat_histogram_reached(self, t_global: int) -> tuple[int, int, float, float]:
        """Increment kappa, reset the counters and lower gamma; returns the FH event row."""
        gamma_before = self.gamma
        self.kappa += 1
        self.nu = [0] * len(self.nu)
        self.t_since_reset = 0
        self.gamma = gamma_schedule(self.kappa, self.gamma0, self.gamma_decay, self.kappa_max)
        self.c = self.c0 * self.c_decay**self.kappa
        event = (self.kappa, t_global, gamma_before, self.gamma)
        self.history.append(event)
        return event


def deterministic_gamma(t: int, alpha: float) -> float:
    """gamma_t = t^{-alpha}; alpha in (0.5, 1) keeps sum gamma = inf and sum gamma^2 < inf."""
    if not 0.5 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0.5, 1), got {alpha}", field="schedule.alpha")
    if t < 1:
        raise ConfigurationError(f"Iteration index must be at least 1, got {t}", field="t")
    return float(t) ** -alpha


def gamma_schedule(kappa: int, gamma0: float, gamma_decay: float, kappa_max: int | None = None) -> float:
    effective = kappa if kappa_max is None else min(kappa, kappa_max)
    return gamma0 * gamma_decay**effective


def fh_met(state: ScheduleState, phi: Sequence[float]) -> bool:
    t = state.t_since_reset
    if t < 1:
        return False
    return max(abs(n / t - p) for n, p in zip(state.nu, phi)) < state.c


def fh_threshold_is_degenerate(phi: Sequence[float], c: float) -> bool:
    """True when FH can fire after a single visit since reset."""
    return c >= min(min(p, 1.0 - p) for p in phi)


def apply_update(
    rule: UpdateRule,
    penalties: PenaltyState,
    bin_index: int,
    phi: Sequence[float],
    gamma: float,
) -> PenaltyState:
    if not 1 <= bin_index <= penalties.d:
        raise ConfigurationError(f"Bin index {bin_index} outside 1..{penalties.d}", field="bin")
    if len(phi) != penalties.d:
        raise ConfigurationError("phi and penalties must have the same length", field="phi")
    hit, miss = rule.increments(phi, gamma)
    current = penalties.log_theta
    return PenaltyState(
        np.array([current[i] + (hit[i] if i == bin_index - 1 else miss[i]) for i in range(penalties.d)])
    )


def two_bin_increments(rule: UpdateRule, phi: Sequence[Number], gamma: Number) -> tuple[Number, Number]:
    """The two values (+a, -b) of the Z^{(1,2)} increment for d = 2, returned as (a, b)."""
    if len(phi) != 2:
        raise ConfigurationError("Two-bin increments are only defined for d = 2", field="phi")
    rule.validate(phi, gamma)
    phi1, phi2 = phi
    a = rule.f(1, phi1, gamma) - rule.f(0, phi2, gamma)
    b = rule.f(1, phi2, gamma) - rule.f(0, phi1, gamma)
    return a, b
