"""Two-state bounding chain for the Z increments, its hitting times and the coupling with the true increments.

States are ``UP`` (+a) and ``DOWN`` (-b). The transition matrix is
``[[1 - eps, eps], [eta, 1 - eta]]`` and the chain drifts downwards when ``a * eta < b * eps``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.stats import sem

from .core import PartitionedTarget, ProposalKernel, ChainState, mh_transition
from .errors import ConfigurationError, CouplingError, DiagnosticError, DomainError, DriftError, NumericalError

logger = logging.getLogger(__name__)


class Increment(IntEnum):
    UP = 0
    DOWN = 1

    @classmethod
    def parse(cls, value: "str | int | Increment") -> "Increment":
        if isinstance(value, Increment):
            return value
        key = str(value).strip().lower()
        if key in {"+a", "a", "up", "+", "0"}:
            return cls.UP
        if key in {"-b", "b", "down", "-", "1"}:
            return cls.DOWN
        raise ConfigurationError(f"Unknown bounding state '{value}' (use '+a' or '-b')", field="start")


@dataclass(frozen=True)
class TwoStateChain:
    epsilon: float
    eta: float
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        for name in ("epsilon", "eta"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must be a probability, got {value}", field=name)
        for name in ("a", "b"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigurationError(f"Step {name} must be positive and finite, got {value}", field=name)

    @property
    def switch(self) -> tuple[float, float]:
        """Probability of leaving UP and of leaving DOWN."""
        return self.epsilon, self.eta

    @property
    def values(self) -> tuple[float, float]:
        return self.a, -self.b

    def has_negative_drift(self) -> bool:
        return self.a * self.eta < self.b * self.epsilon


def transition_matrix(chain: TwoStateChain) -> np.ndarray:
    return np.array(
        [
            [1.0 - chain.epsilon, chain.epsilon],
            [chain.eta, 1.0 - chain.eta],
        ]
    )


def stationary_distribution(chain: TwoStateChain) -> np.ndarray:
    total = chain.epsilon + chain.eta
    if total <= 0:
        raise ConfigurationError("Stationary distribution is not unique when epsilon = eta = 0", field="epsilon")
    return np.array([chain.eta / total, chain.epsilon / total])


def stationary_drift(chain: TwoStateChain) -> float:
    up, down = stationary_distribution(chain)
    return chain.a * up - chain.b * down


def simulate_bounding_chain(
    chain: TwoStateChain,
    start_state: "Increment | str",
    steps: int,
    seed: int | np.random.SeedSequence | None = None,
) -> np.ndarray:
    """Increments U_1..U_steps of the chain after ``start_state``; returns the +a / -b values.

    Runs are drawn as geometric sojourn lengths instead of step by step.
    """
    if int(steps) < 1:
        raise ConfigurationError("steps must be at least 1", field="steps")
    rng = np.random.default_rng(seed)
    state = Increment.parse(start_state)
    states = np.empty(steps, dtype=np.int8)
    position = 0
    # the start state is not part of the output, so its remaining sojourn is one step shorter
    first = True
    while position < steps:
        leave = chain.switch[state]
        if leave <= 0:
            states[position:] = state
            break
        run = int(rng.geometric(leave)) - (1 if first else 0)
        first = False
        end = min(steps, position + run)
        states[position:end] = state
        position = end
        state = Increment(1 - state)
    return np.where(states == Increment.UP, chain.a, -chain.b)


def _integer_steps(chain: TwoStateChain, max_denominator: int) -> tuple[int, int]:
    ratio = Fraction(chain.a / chain.b).limit_denominator(max_denominator)
    if abs(float(ratio) - chain.a / chain.b) > 1e-12 * max(1.0, chain.a / chain.b):
        raise DomainError(
            f"a/b = {chain.a / chain.b!r} is not a ratio of integers below {max_denominator}; "
            "first-step analysis needs commensurable steps"
        )
    return ratio.numerator, ratio.denominator


def _solve_truncated(chain: TwoStateChain, up: int, down: int, max_level: int, start: Increment) -> float:
    """First-step analysis on levels -up+1 .. max_level; moves above ``max_level`` are held at the cap."""
    low = -up + 1
    levels = np.arange(low, max_level + 1)
    size = 2 * levels.size
    higher = np.minimum(levels + up, max_level)
    lower = levels - down
    inside = lower >= low

    def index(level: np.ndarray, state: int) -> np.ndarray:
        return 2 * (level - low) + state

    rows, cols, data = [np.arange(size)], [np.arange(size)], [np.ones(size)]
    # (state, probability of an up-step next, probability of a down-step next)
    for state, p_up, p_down in (
        (Increment.UP, 1.0 - chain.epsilon, chain.epsilon),
        (Increment.DOWN, chain.eta, 1.0 - chain.eta),
    ):
        row = index(levels, state)
        rows += [row, row[inside]]
        cols += [index(higher, Increment.UP), index(lower[inside], Increment.DOWN)]
        data += [np.full(row.size, -p_up), np.full(int(inside.sum()), -p_down)]

    # duplicate (row, col) pairs at the cap are summed by the sparse constructor
    matrix = sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    )
    solution = spsolve(matrix, np.ones(size))
    value = float(solution[2 * (0 - low) + start])
    if not math.isfinite(value):
        raise NumericalError("First-step system is singular")
    return value


def expected_hitting_time(
    chain: TwoStateChain,
    start_state: "Increment | str" = Increment.UP,
    rtol: float = 1e-6,
    max_denominator: int = 1000,
    initial_level: int | None = None,
    max_level: int = 1 << 20,
) -> float:
    """E[T] for T = inf{n >= 0 : U_1 + ... + U_n <= -a}, where U_0 is ``start_state``.

    The cumulative sum is expressed in units of b / denominator(a/b) so levels are integers;
    the level cap doubles until successive answers agree to ``rtol``.
    """
    if not chain.has_negative_drift():
        raise DriftError(
            f"a*eta = {chain.a * chain.eta:.6g} >= b*epsilon = {chain.b * chain.epsilon:.6g}, "
            "the hitting time may be infinite"
        )
    start = Increment.parse(start_state)
    up, down = _integer_steps(chain, max_denominator)
    level = initial_level or max(64, 8 * (up + down))
    previous = _solve_truncated(chain, up, down, level, start)
    while level < max_level:
        level *= 2
        current = _solve_truncated(chain, up, down, level, start)
        if abs(current - previous) <= rtol * abs(current):
            logger.debug("Hitting time converged at level cap %d: %.9g", level, current)
            return current
        previous = current
    raise NumericalError(f"Hitting time did not converge below level cap {max_level}")


@dataclass(frozen=True)
class HittingEstimate:
    mean: float
    se: float
    censored: int
    replicas: int


def mc_hitting_time(
    chain: TwoStateChain,
    replicas: int,
    seed: int | np.random.SeedSequence | None = None,
    start_state: "Increment | str" = Increment.UP,
    max_steps: int = 1_000_000,
) -> HittingEstimate:
    """Monte Carlo estimate of the same hitting time, all replicas advanced together."""
    if int(replicas) < 2:
        raise ConfigurationError("At least two replicas are required for a standard error", field="replicas")
    rng = np.random.default_rng(seed)
    threshold = -chain.a + 1e-12 * max(chain.a, chain.b)
    leave = np.array(chain.switch)
    steps_value = np.array(chain.values)

    state = np.full(replicas, int(Increment.parse(start_state)), dtype=np.int8)
    level = np.zeros(replicas)
    alive = np.arange(replicas)
    times = np.zeros(replicas, dtype=np.int64)
    step = 0
    while alive.size and step < max_steps:
        step += 1
        switched = rng.random(alive.size) < leave[state]
        state = np.where(switched, 1 - state, state).astype(np.int8)
        level += steps_value[state]
        hit = level <= threshold
        if hit.any():
            times[alive[hit]] = step
            keep = ~hit
            alive, state, level = alive[keep], state[keep], level[keep]

    censored = int(alive.size)
    if censored:
        logger.warning("%d of %d hitting-time replicas did not hit within %d steps", censored, replicas, max_steps)
    finished = np.delete(times, alive) if censored else times
    if finished.size < 2:
        raise NumericalError("Too few replicas reached the level to estimate the hitting time")
    return HittingEstimate(
        mean=float(finished.mean()),
        se=float(sem(finished)),
        censored=censored,
        replicas=int(replicas),
    )


@dataclass(frozen=True)
class HittingRow:
    epsilon: float
    eta: float
    a: float
    b: float
    analytic: float
    mc_mean: float
    mc_se: float
    censored: int = 0

    @property
    def z_score(self) -> float:
        if self.mc_se == 0:
            return 0.0 if self.mc_mean == self.analytic else math.inf
        return abs(self.mc_mean - self.analytic) / self.mc_se


def hitting_time_table(
    chains: Iterable[TwoStateChain],
    replicas: int,
    seed: int,
    start_state: "Increment | str" = Increment.UP,
) -> list[HittingRow]:
    rows = []
    for k, chain in enumerate(chains):
        analytic = expected_hitting_time(chain, start_state)
        estimate = mc_hitting_time(chain, replicas, np.random.SeedSequence(seed, spawn_key=(k,)), start_state)
        rows.append(
            HittingRow(
                epsilon=chain.epsilon,
                eta=chain.eta,
                a=chain.a,
                b=chain.b,
                analytic=analytic,
                mc_mean=estimate.mean,
                mc_se=estimate.se,
                censored=estimate.censored,
            )
        )
    return rows


def write_hitting_table_csv(rows: Sequence[HittingRow], path: Path) -> None:
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", encoding="ascii", newline="\n") as handle:
        handle.write("epsilon,eta,a,b,analytic,mc_mean,mc_se\n")
        for row in rows:
            handle.write(
                f"{row.epsilon:.6g},{row.eta:.6g},{row.a:.6g},{row.b:.6g},"
                f"{row.analytic:.9g},{row.mc_mean:.9g},{row.mc_se:.3g}\n"
            )


# ----------------------------------------------------------------------
# Coupling with the true increments


@dataclass(frozen=True)
class ConditionalLaw:
    """Law of the true increment given the previous one, at a fixed penalty level."""

    p_minus_after_plus: float
    p_minus_after_minus: float

    def __post_init__(self) -> None:
        for name in ("p_minus_after_plus", "p_minus_after_minus"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must be a probability, got {value}", field=name)

    def p_minus(self, previous: Increment) -> float:
        return self.p_minus_after_plus if previous == Increment.UP else self.p_minus_after_minus

    def dominates(self, epsilon: float, eta: float) -> bool:
        """Both lower bounds needed to build the coupling."""
        return self.p_minus_after_plus >= epsilon and self.p_minus_after_minus >= 1.0 - eta


@dataclass(frozen=True)
class CouplingProbabilities:
    p1: float
    p2: float
    p3: float

    def __post_init__(self) -> None:
        for name in ("p1", "p2", "p3"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise CouplingError(f"{name} = {value:.6g} is not a probability; the law does not dominate the chain")


def coupling_probabilities(law: ConditionalLaw, epsilon: float, eta: float) -> CouplingProbabilities:
    if not 0.0 < epsilon < 0.5:
        raise ConfigurationError(f"epsilon must lie in (0, 1/2), got {epsilon}", field="epsilon")
    if not 0.0 < eta < 0.5:
        raise ConfigurationError(f"eta must lie in (0, 1/2), got {eta}", field="eta")
    p_mp = law.p_minus_after_plus
    p_mm = law.p_minus_after_minus
    if p_mp <= 0 or p_mm <= 0:
        raise CouplingError("The true law never steps down from one of the states")
    return CouplingProbabilities(
        p1=(1.0 - eta) / p_mm,
        p2=epsilon / p_mp,
        p3=epsilon * (1.0 + (1.0 - p_mm) / p_mm),
    )


def coupled_pair_step(
    u: Increment,
    u_tilde: Increment,
    law: ConditionalLaw,
    probabilities: CouplingProbabilities,
    rng: np.random.Generator,
) -> tuple[Increment, Increment]:
    """Advance the true increment and its dominating copy by one step."""
    # two uniforms on every call
    draw_true, draw_copy = rng.random(2)
    next_u = Increment.DOWN if draw_true < law.p_minus(u) else Increment.UP
    if next_u == Increment.UP:
        return next_u, Increment.UP
    if u == Increment.DOWN and u_tilde == Increment.DOWN:
        keep_down = probabilities.p1
    elif u == Increment.UP and u_tilde == Increment.UP:
        keep_down = probabilities.p2
    elif u == Increment.DOWN and u_tilde == Increment.UP:
        keep_down = probabilities.p3
    else:
        raise CouplingError("Dominating copy fell below the true increment")
    return next_u, Increment.DOWN if draw_copy < keep_down else Increment.UP


@dataclass
class CouplingRun:
    u: np.ndarray
    u_tilde: np.ndarray
    probabilities: CouplingProbabilities
    violations: int
    transitions: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=np.int64))

    def transition_frequencies(self) -> np.ndarray:
        totals = self.transitions.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.transitions / totals

    def transition_standard_errors(self, chain: TwoStateChain) -> np.ndarray:
        expected = transition_matrix(chain)
        totals = self.transitions.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sqrt(expected * (1.0 - expected) / totals)


def simulate_coupling(
    law: ConditionalLaw,
    epsilon: float,
    eta: float,
    steps: int,
    seed: int | np.random.SeedSequence | None = None,
) -> CouplingRun:
    """Run the coupled pair from U_s = U~_s = +a and count the transitions of the dominating copy."""
    if int(steps) < 1:
        raise ConfigurationError("steps must be at least 1", field="steps")
    probabilities = coupling_probabilities(law, epsilon, eta)
    rng = np.random.default_rng(seed)
    u, u_tilde = Increment.UP, Increment.UP
    us = np.empty(steps, dtype=np.int8)
    tildes = np.empty(steps, dtype=np.int8)
    transitions = np.zeros((2, 2), dtype=np.int64)
    violations = 0
    for step in range(steps):
        next_u, next_tilde = coupled_pair_step(u, u_tilde, law, probabilities, rng)
        transitions[u_tilde, next_tilde] += 1
        # UP is +a, DOWN is -b, so U <= U~ fails only for (UP, DOWN)
        if next_u == Increment.UP and next_tilde == Increment.DOWN:
            violations += 1
        us[step], tildes[step] = next_u, next_tilde
        u, u_tilde = next_u, next_tilde
    return CouplingRun(u=us, u_tilde=tildes, probabilities=probabilities, violations=violations, transitions=transitions)


# ----------------------------------------------------------------------
# Live sampler adapter (two bins)


def estimate_conditional_law(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    z: float,
    samples: int,
    seed: int | np.random.SeedSequence | None = None,
    x0: float | None = None,
) -> ConditionalLaw:
    """Empirical law of the next increment with the penalties frozen at Z^{(1,2)} = z.

    A visit to bin 1 is an up-step of Z and a visit to bin 2 a down-step.
    """
    if target.d != 2:
        raise ConfigurationError("The conditional law is only defined for two bins", field="bin_edges")
    if int(samples) < 2:
        raise ConfigurationError("samples must be at least 2", field="samples")
    rng = np.random.default_rng(seed)
    if x0 is None:
        lo, hi = target.support
        x0 = 0.5 * (lo + hi)
    log_theta = [0.5 * z, -0.5 * z]
    state = ChainState.at(target, x0)
    counts = np.zeros((2, 2), dtype=np.int64)
    previous = state.bin - 1
    for _ in range(samples):
        state = mh_transition(target, proposal, log_theta, state, rng)
        current = state.bin - 1
        counts[previous, current] += 1
        previous = current
    totals = counts.sum(axis=1)
    if (totals == 0).any():
        raise DiagnosticError(f"At Z = {z} the sampler never left one of the bins; increase samples")
    return ConditionalLaw(
        p_minus_after_plus=float(counts[0, 1] / totals[0]),
        p_minus_after_minus=float(counts[1, 1] / totals[1]),
    )


@dataclass(frozen=True)
class ThresholdEstimate:
    z: float
    law: ConditionalLaw


def estimate_threshold(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    epsilon: float,
    eta: float,
    z_grid: Sequence[float],
    samples: int,
    seed: int = 0,
) -> ThresholdEstimate | None:
    """Smallest grid value of Z above which the sampled law satisfies both coupling bounds."""
    if not 0.0 < epsilon < 0.5 or not 0.0 < eta < 0.5:
        raise ConfigurationError("epsilon and eta must lie in (0, 1/2)", field="epsilon")
    for k, z in enumerate(sorted(float(value) for value in z_grid)):
        law = estimate_conditional_law(target, proposal, z, samples, np.random.SeedSequence(seed, spawn_key=(k,)))
        logger.debug("Z = %.4g: P[-b|+a] = %.4f, P[-b|-b] = %.4f", z, law.p_minus_after_plus, law.p_minus_after_minus)
        if law.p_minus_after_plus > epsilon and law.p_minus_after_minus > 1.0 - eta:
            return ThresholdEstimate(z=z, law=law)
    logger.warning("No grid value of Z satisfies the bounds for epsilon=%s, eta=%s", epsilon, eta)
    return None
