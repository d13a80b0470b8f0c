from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import ChainState, PartitionedTarget, PenaltyState, ProposalKernel, mh_transition, penalized_masses
from .errors import ConfigurationError, DomainError
from .updates import UpdateRule

logger = logging.getLogger(__name__)

Counts = tuple[int, ...]


@dataclass(frozen=True)
class RationalFrequencies:
    """phi_i = a_i / b with integer numerators summing to the common denominator."""

    phi: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        values = tuple(Fraction(value) if not isinstance(value, float) else _fraction_from_float(value) for value in self.phi)
        if len(values) < 2:
            raise ConfigurationError("At least two frequencies are required", field="phi")
        if any(value <= 0 for value in values):
            raise ConfigurationError("Frequencies must be positive", field="phi")
        if sum(values) != 1:
            raise ConfigurationError(f"Frequencies must sum to exactly 1, got {sum(values)}", field="phi")
        object.__setattr__(self, "phi", values)

    @classmethod
    def parse(cls, text: str) -> "RationalFrequencies":
        parts = [part.strip() for part in text.split(",") if part.strip()]
        try:
            return cls(tuple(Fraction(part) for part in parts))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigurationError(f"Cannot read frequencies from '{text}'", field="phi") from exc

    @property
    def d(self) -> int:
        return len(self.phi)

    @property
    def denominator(self) -> int:
        b = math.lcm(*(value.denominator for value in self.phi))
        return b // self._common_factor(b)

    @property
    def numerators(self) -> Counts:
        b = math.lcm(*(value.denominator for value in self.phi))
        g = self._common_factor(b)
        return tuple(int(value * b) // g for value in self.phi)

    def _common_factor(self, b: int) -> int:
        return math.gcd(b, *(int(value * b) for value in self.phi))

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(value) for value in self.phi)

    def __str__(self) -> str:
        return ",".join(str(value) for value in self.phi)


def _fraction_from_float(value: float) -> Fraction:
    return Fraction(value).limit_denominator(10**6)


@dataclass(frozen=True)
class LatticePoint:
    """Point z_i = n_i - phi_i * S_n reached from zero after the visit counts ``counts``."""

    counts: Counts
    phi: RationalFrequencies

    def __post_init__(self) -> None:
        counts = tuple(int(n) for n in self.counts)
        if len(counts) != self.phi.d:
            raise DomainError(f"Count vector has {len(counts)} entries, expected {self.phi.d}")
        if any(n < 0 for n in counts):
            raise DomainError("Visit counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def coordinates(self) -> tuple[Fraction, ...]:
        return displacement(self.phi, self.counts)

    def is_zero(self) -> bool:
        return all(value == 0 for value in self.coordinates)


def displacement(phi: RationalFrequencies, counts: Sequence[int]) -> tuple[Fraction, ...]:
    """Exact change of log theta after the given visit counts under the Linear rule with gamma = 1."""
    total = sum(counts)
    return tuple(Fraction(n) - p * total for n, p in zip(counts, phi.phi))


def zero_return_path(phi: RationalFrequencies) -> LatticePoint:
    """Smallest positive counts n with n_i = phi_i * S_n, namely n = (a_1, ..., a_d)."""
    point = LatticePoint(phi.numerators, phi)
    if not point.is_zero():
        raise DomainError(f"Counts {point.counts} do not return to zero for phi = {phi}")
    return point


def lattice_point_from_coordinates(phi: RationalFrequencies, z: Sequence[Fraction | int | str]) -> LatticePoint:
    """Find nonnegative counts reaching ``z``; raises DomainError when ``z`` is not on the lattice."""
    coordinates = tuple(Fraction(value) for value in z)
    if len(coordinates) != phi.d:
        raise DomainError(f"Point has {len(coordinates)} coordinates, expected {phi.d}")
    if sum(coordinates) != 0:
        raise DomainError("Lattice coordinates must sum to zero")
    # n_i = z_i + phi_i * S must be a nonnegative integer; the pattern in S repeats with period b
    lowest = max(0, max(math.ceil(-value / p) for value, p in zip(coordinates, phi.phi)))
    for total in range(lowest, lowest + phi.denominator):
        counts = [value + p * total for value, p in zip(coordinates, phi.phi)]
        if all(count.denominator == 1 and count >= 0 for count in counts):
            return LatticePoint(tuple(int(count) for count in counts), phi)
    raise DomainError(f"{tuple(str(value) for value in coordinates)} is not reachable for phi = {phi}")


def lattice_path(
    phi: RationalFrequencies,
    z_from: LatticePoint | Sequence[Fraction | int | str],
    z_to: LatticePoint | Sequence[Fraction | int | str],
) -> Counts:
    """Visit counts k that move z_from to z_to: first back to zero with C*n - m, then out with m'."""
    start = _as_point(phi, z_from)
    end = _as_point(phi, z_to)
    cycle = zero_return_path(phi).counts
    scale = max(1, max(math.ceil(m / n) for m, n in zip(start.counts, cycle)))
    path = tuple(scale * n - m + m_to for n, m, m_to in zip(cycle, start.counts, end.counts))
    if not verify_path(phi, start, end, path):
        raise DomainError(f"Path {path} does not join the two lattice points")
    return path


def verify_path(phi: RationalFrequencies, z_from: LatticePoint, z_to: LatticePoint, path: Sequence[int]) -> bool:
    if any(k < 0 for k in path):
        return False
    step = displacement(phi, path)
    return all(a + s == b for a, s, b in zip(z_from.coordinates, step, z_to.coordinates))


def _as_point(phi: RationalFrequencies, value: LatticePoint | Sequence[Fraction | int | str]) -> LatticePoint:
    if isinstance(value, LatticePoint):
        if value.phi != phi:
            raise DomainError("Lattice point was built for different frequencies")
        return value
    return lattice_point_from_coordinates(phi, value)


@dataclass(frozen=True)
class RealizedPattern:
    counts: Counts
    trials: int
    realized: int

    @property
    def fraction(self) -> float:
        return self.realized / self.trials


@dataclass
class IrreducibilityReport:
    start_bin: int
    gamma: float
    patterns: list[RealizedPattern]
    warnings: list[str] = field(default_factory=list)

    def fraction_for(self, counts: Sequence[int]) -> float:
        key = tuple(counts)
        for pattern in self.patterns:
            if pattern.counts == key:
                return pattern.fraction
        raise KeyError(key)


def irreducibility_smoke_test(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    phi: RationalFrequencies,
    trials: int,
    seed: int | np.random.SeedSequence | None = None,
    count_vectors: Iterable[Sequence[int]] | None = None,
    gamma: float = 0.1,
    x0: float | None = None,
    random_patterns: int = 4,
) -> IrreducibilityReport:
    """Fraction of short Linear-rule paths whose per-bin visit counts equal each requested vector.

    Every path starts at ``x0`` with theta = 1/d and runs S_n = sum(n) steps.
    """
    if phi.d != target.d:
        raise ConfigurationError(f"phi has {phi.d} entries but the target has {target.d} bins", field="phi")
    if int(trials) < 1:
        raise ConfigurationError("trials must be at least 1", field="trials")
    rng = np.random.default_rng(seed)
    if x0 is None:
        lo, hi = target.support
        x0 = 0.5 * (lo + hi)
    start = ChainState.at(target, x0)
    d = target.d

    if count_vectors is None:
        lazy = tuple(3 if i == start.bin - 1 else 0 for i in range(d))
        vectors = [lazy]
        while len(vectors) < 1 + random_patterns:
            candidate = tuple(int(v) for v in rng.integers(0, 3, size=d))
            if sum(candidate) > 0 and candidate not in vectors:
                vectors.append(candidate)
    else:
        vectors = [tuple(int(v) for v in counts) for counts in count_vectors]
    for counts in vectors:
        if len(counts) != d or any(v < 0 for v in counts) or sum(counts) == 0:
            raise ConfigurationError(f"Invalid count vector {counts}", field="counts")

    warnings: list[str] = []
    masses = penalized_masses(target, PenaltyState.uniform(d), grid_size=401)
    empty = [i + 1 for i, mass in enumerate(masses) if mass <= 0]
    for counts in vectors:
        for bin_index in empty:
            if counts[bin_index - 1] > 0:
                message = f"bin {bin_index} has zero target mass, counts {counts} cannot be realized"
                logger.warning(message)
                warnings.append(message)

    hit, miss = UpdateRule.LINEAR.increments(phi.as_floats(), gamma)
    initial = [-math.log(d)] * d
    patterns = []
    for counts in vectors:
        steps = sum(counts)
        realized = 0
        for _ in range(trials):
            state = start
            log_theta = list(initial)
            visits = [0] * d
            for _ in range(steps):
                state = mh_transition(target, proposal, log_theta, state, rng)
                current = state.bin - 1
                visits[current] += 1
                log_theta = [value + (hit[i] if i == current else miss[i]) for i, value in enumerate(log_theta)]
            realized += tuple(visits) == counts
        patterns.append(RealizedPattern(counts=counts, trials=int(trials), realized=realized))
        logger.debug("counts %s realized in %d of %d paths", counts, realized, trials)
    return IrreducibilityReport(start_bin=start.bin, gamma=gamma, patterns=patterns, warnings=warnings)
