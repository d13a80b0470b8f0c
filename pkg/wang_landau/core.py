from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, DiagnosticError, DomainError

logger = logging.getLogger(__name__)

LogDensity = Callable[[float], float]
LogProposal = Callable[[float, float], float]
ProposalSampler = Callable[[float, np.random.Generator], float]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PartitionedTarget:
    """Unnormalized log-density on a compact interval, split into bins by ``bin_edges``.

    Bin 1 is ``[e_0, e_1]`` and bin ``i >= 2`` is ``(e_{i-1}, e_i]``, so the toy partition
    ``[-10, 0, 10]`` reads ``X_1 = [-10, 0]`` and ``X_2 = (0, 10]``.
    """

    log_density: LogDensity
    bin_edges: tuple[float, ...]
    name: str = "target"

    def __post_init__(self) -> None:
        edges = tuple(float(edge) for edge in self.bin_edges)
        if len(edges) < 3:
            raise ConfigurationError("At least two bins (three edges) are required", field="bin_edges")
        if not all(math.isfinite(edge) for edge in edges):
            raise ConfigurationError("Bin edges must be finite (compact support)", field="bin_edges")
        if any(hi <= lo for lo, hi in zip(edges, edges[1:])):
            raise ConfigurationError("Bin edges must be strictly increasing", field="bin_edges")
        object.__setattr__(self, "bin_edges", edges)

    @property
    def d(self) -> int:
        return len(self.bin_edges) - 1

    @property
    def support(self) -> tuple[float, float]:
        return self.bin_edges[0], self.bin_edges[-1]

    def contains(self, x: float) -> bool:
        return self.bin_edges[0] <= x <= self.bin_edges[-1]

    def bin_widths(self) -> np.ndarray:
        return np.diff(np.asarray(self.bin_edges))


@dataclass(frozen=True)
class ProposalKernel:
    log_q: LogProposal
    sampler: ProposalSampler
    symmetric: bool = False
    name: str = "proposal"


@dataclass(frozen=True)
class PenaltyState:
    """Log-domain penalties; only differences between entries carry information."""

    log_theta: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.log_theta, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ConfigurationError("Penalty vector must be one-dimensional with at least two entries")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("Penalty entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "log_theta", values)

    @classmethod
    def uniform(cls, d: int) -> "PenaltyState":
        """Initial penalties theta_0(i) = 1/d."""
        return cls(np.full(d, -math.log(d)))

    @property
    def d(self) -> int:
        return int(self.log_theta.size)

    def z(self, i: int, j: int) -> float:
        """Z^{(i,j)} = log theta(i) - log theta(j) for 1-based bins."""
        return float(self.log_theta[i - 1] - self.log_theta[j - 1])

    def z_pairs(self) -> np.ndarray:
        return np.array([self.z(i, j) for i, j in bin_pairs(self.d)])

    def shifted(self, constant: float) -> "PenaltyState":
        return PenaltyState(self.log_theta + constant)

    def recentered(self) -> "PenaltyState":
        return PenaltyState(self.log_theta - self.log_theta.mean())


@dataclass(slots=True)
class ChainState:
    x: float
    bin: int
    log_pi_x: float

    @classmethod
    def at(cls, target: PartitionedTarget, x: float) -> "ChainState":
        log_pi_x = float(target.log_density(float(x)))
        if not math.isfinite(log_pi_x):
            raise DomainError(f"Initial point {x} has zero target density")
        return cls(x=float(x), bin=bin_of(target, x), log_pi_x=log_pi_x)


@dataclass(slots=True)
class AssumptionReport:
    """Grid-based estimates for the boundedness assumptions; every number is an approximation."""

    grid_size: int
    log_q_min: float
    log_m: float
    log_M: float
    bin_widths: np.ndarray
    bin_masses: np.ndarray
    compact: bool = True
    approximate: bool = True
    warnings: list[str] = field(default_factory=list)

    @property
    def q_min(self) -> float:
        return math.exp(self.log_q_min)

    @property
    def m(self) -> float:
        return math.exp(self.log_m)

    @property
    def M(self) -> float:
        return math.exp(self.log_M)

    @property
    def width_ok(self) -> np.ndarray:
        return self.bin_widths > 0

    @property
    def mass_ok(self) -> np.ndarray:
        return self.bin_masses > 0

    @property
    def ratio_bounded(self) -> bool:
        return math.isfinite(self.log_m) and math.isfinite(self.log_M)

    def violations(self) -> list[str]:
        found: list[str] = []
        for index, ok in enumerate(self.width_ok, start=1):
            if not ok:
                found.append(f"bin {index} has zero width")
        for index, ok in enumerate(self.mass_ok, start=1):
            if not ok:
                found.append(f"bin {index} has zero target mass")
        if not self.compact:
            found.append("support is not compact")
        if not self.log_q_min > -math.inf:
            found.append("proposal density vanishes on the grid")
        if not self.ratio_bounded:
            found.append("MH ratio is unbounded on the grid")
        return found

    @property
    def passed(self) -> bool:
        return not self.violations()


def bin_pairs(d: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, d + 1) for j in range(i + 1, d + 1)]


def bin_of(target: PartitionedTarget, x: float) -> int:
    if not target.contains(x):
        lo, hi = target.support
        raise DomainError(f"Point {x} lies outside the support [{lo}, {hi}]")
    return max(1, bisect.bisect_left(target.bin_edges, x))


def penalized_log_density(target: PartitionedTarget, penalties: PenaltyState, x: float) -> float:
    return float(target.log_density(x)) - float(penalties.log_theta[bin_of(target, x) - 1])


def log_acceptance_ratio(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    penalties: PenaltyState,
    x: float,
    y: float,
) -> float:
    if not target.contains(y):
        return -math.inf
    log_pi_theta_x = penalized_log_density(target, penalties, x)
    if not math.isfinite(log_pi_theta_x):
        raise DomainError(f"Current point {x} has zero target density")
    log_ratio = penalized_log_density(target, penalties, y) - log_pi_theta_x
    if log_ratio == -math.inf or proposal.symmetric:
        return log_ratio
    return log_ratio + proposal.log_q(y, x) - proposal.log_q(x, y)


def acceptance_probability(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    penalties: PenaltyState,
    x: float,
    y: float,
) -> float:
    return math.exp(min(0.0, log_acceptance_ratio(target, proposal, penalties, x, y)))


def mh_step(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    penalties: PenaltyState,
    state: ChainState,
    rng: np.random.Generator,
) -> ChainState:
    """One draw from the penalized Metropolis-Hastings kernel K_theta."""
    return mh_transition(target, proposal, penalties.log_theta, state, rng)


def mh_transition(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    log_theta: Sequence[float],
    state: ChainState,
    rng: np.random.Generator,
) -> ChainState:
    # A proposal and a uniform are drawn on every call so replicas consume identical streams.
    y = float(proposal.sampler(state.x, rng))
    u = rng.random()
    edges = target.bin_edges
    if not edges[0] <= y <= edges[-1]:
        return state
    log_pi_y = float(target.log_density(y))
    if log_pi_y == -math.inf:
        return state
    bin_y = max(1, bisect.bisect_left(edges, y))
    log_ratio = _log_ratio(target, proposal, log_theta, state, y, log_pi_y, bin_y)
    if u < math.exp(min(0.0, log_ratio)):
        return ChainState(x=y, bin=bin_y, log_pi_x=log_pi_y)
    return state


def _log_ratio(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    log_theta: Sequence[float],
    state: ChainState,
    y: float,
    log_pi_y: float,
    bin_y: int,
) -> float:
    log_ratio = log_pi_y - state.log_pi_x + (log_theta[state.bin - 1] - log_theta[bin_y - 1])
    if not proposal.symmetric:
        log_ratio += proposal.log_q(y, state.x) - proposal.log_q(state.x, y)
    return log_ratio


def check_assumptions(
    target: PartitionedTarget,
    proposal: ProposalKernel,
    grid_size: int = 201,
) -> AssumptionReport:
    if grid_size < 2:
        raise ConfigurationError("grid_size must be at least 2", field="grid_size")
    lo, hi = target.support
    grid = np.linspace(lo, hi, grid_size)
    log_pi = _evaluate(target.log_density, grid)
    finite = np.isfinite(log_pi)
    if not finite.any():
        raise DiagnosticError(f"Log-density of '{target.name}' is non-finite on the whole grid")

    log_q = np.array([[proposal.log_q(float(x), float(y)) for y in grid] for x in grid])
    log_q_min = float(np.min(log_q))

    warnings: list[str] = []
    if finite.all():
        # entry [x, y] = log pi(y) Q(y, x) / (pi(x) Q(x, y))
        ratio = log_pi[None, :] + log_q.T - log_pi[:, None] - log_q
        ratio = ratio[np.isfinite(ratio)]
        log_m = float(ratio.min()) if ratio.size else -math.inf
        log_M = float(ratio.max()) if ratio.size else math.inf
    else:
        log_m, log_M = -math.inf, math.inf
        warnings.append("target density vanishes on part of the grid, the MH ratio is unbounded")

    masses = _bin_masses(target, grid_size)
    report = AssumptionReport(
        grid_size=grid_size,
        log_q_min=log_q_min,
        log_m=log_m,
        log_M=log_M,
        bin_widths=target.bin_widths(),
        bin_masses=masses,
        warnings=warnings,
    )
    for problem in report.violations():
        logger.warning("Assumption check on '%s': %s", target.name, problem)
    return report


def penalized_masses(target: PartitionedTarget, penalties: PenaltyState, grid_size: int = 2001) -> np.ndarray:
    """Normalized pi_theta mass of every bin, integrated on a per-bin grid."""
    masses = _bin_masses(target, grid_size) * np.exp(-(penalties.log_theta - penalties.log_theta.max()))
    total = masses.sum()
    if total <= 0:
        raise DiagnosticError("Penalized target has zero mass on the grid")
    return masses / total


def assemble_penalized_kernel(
    log_pi: Sequence[float],
    proposal_matrix: np.ndarray,
    bins: Sequence[int],
    log_theta: Sequence[float],
) -> np.ndarray:
    """Transition matrix of K_theta on a finite state space with an explicit proposal matrix."""
    log_pi_arr = np.asarray(log_pi, dtype=float)
    q = np.asarray(proposal_matrix, dtype=float)
    n = log_pi_arr.size
    if q.shape != (n, n):
        raise ConfigurationError("Proposal matrix must be square and match the number of states")
    if not np.allclose(q.sum(axis=1), 1.0, atol=1e-12):
        raise ConfigurationError("Proposal matrix rows must sum to one")
    penalty = np.asarray(log_theta, dtype=float)[np.asarray(bins, dtype=int) - 1]
    log_pen = log_pi_arr - penalty
    with np.errstate(divide="ignore", invalid="ignore"):
        log_q = np.log(q)
        log_ratio = log_pen[None, :] - log_pen[:, None] + log_q.T - log_q
        accept = np.exp(np.minimum(0.0, np.nan_to_num(log_ratio, nan=-np.inf)))
    kernel = np.where(q > 0, q * accept, 0.0)
    np.fill_diagonal(kernel, 0.0)
    np.fill_diagonal(kernel, 1.0 - kernel.sum(axis=1))
    return kernel


def truncated_normal(
    bin_edges: Sequence[float],
    mean: float = 0.0,
    sd: float = 1.0,
) -> PartitionedTarget:
    if sd <= 0:
        raise ConfigurationError("Standard deviation must be positive", field="target.sd")
    lo, hi = float(bin_edges[0]), float(bin_edges[-1])

    def log_density(x: float) -> float:
        if not lo <= x <= hi:
            return -math.inf
        z = (x - mean) / sd
        return -0.5 * z * z

    return PartitionedTarget(log_density=log_density, bin_edges=tuple(bin_edges), name="truncated_normal")


def uniform_target(bin_edges: Sequence[float]) -> PartitionedTarget:
    lo, hi = float(bin_edges[0]), float(bin_edges[-1])

    def log_density(x: float) -> float:
        return 0.0 if lo <= x <= hi else -math.inf

    return PartitionedTarget(log_density=log_density, bin_edges=tuple(bin_edges), name="uniform")


def normal_mixture(
    bin_edges: Sequence[float],
    weights: Sequence[float],
    means: Sequence[float],
    sds: Sequence[float],
) -> PartitionedTarget:
    if not len(weights) == len(means) == len(sds) or not weights:
        raise ConfigurationError("Mixture weights, means and sds must have the same positive length", field="target")
    if any(w <= 0 for w in weights) or any(s <= 0 for s in sds):
        raise ConfigurationError("Mixture weights and sds must be positive", field="target")
    lo, hi = float(bin_edges[0]), float(bin_edges[-1])
    components = [(math.log(w) - math.log(s), float(m), float(s)) for w, m, s in zip(weights, means, sds)]

    def log_density(x: float) -> float:
        if not lo <= x <= hi:
            return -math.inf
        return float(logsumexp([c - 0.5 * ((x - m) / s) ** 2 for c, m, s in components]))

    return PartitionedTarget(log_density=log_density, bin_edges=tuple(bin_edges), name="normal_mixture")


def step_target(bin_edges: Sequence[float], levels: Sequence[float]) -> PartitionedTarget:
    """Piecewise-constant density, one level per bin; a zero level empties the bin."""
    if len(levels) != len(bin_edges) - 1:
        raise ConfigurationError("Step target needs one level per bin", field="target.levels")
    if any(level < 0 for level in levels) or not any(level > 0 for level in levels):
        raise ConfigurationError("Step levels must be nonnegative with at least one positive", field="target.levels")
    edges = tuple(float(edge) for edge in bin_edges)
    log_levels = [math.log(level) if level > 0 else -math.inf for level in levels]

    def log_density(x: float) -> float:
        if not edges[0] <= x <= edges[-1]:
            return -math.inf
        return log_levels[max(1, bisect.bisect_left(edges, x)) - 1]

    return PartitionedTarget(log_density=log_density, bin_edges=edges, name="step")


def gaussian_random_walk(scale: float = 1.0) -> ProposalKernel:
    if scale <= 0:
        raise ConfigurationError("Random-walk scale must be positive", field="proposal.scale")
    log_norm = math.log(scale) + _LOG_SQRT_2PI

    def log_q(x: float, y: float) -> float:
        z = (y - x) / scale
        return -0.5 * z * z - log_norm

    def sampler(x: float, rng: np.random.Generator) -> float:
        return x + scale * rng.standard_normal()

    return ProposalKernel(log_q=log_q, sampler=sampler, symmetric=True, name="gaussian_rw")


def uniform_independent(lo: float, hi: float) -> ProposalKernel:
    if not hi > lo:
        raise ConfigurationError("Independence proposal needs hi > lo", field="proposal")
    log_width = math.log(hi - lo)

    def log_q(x: float, y: float) -> float:
        return -log_width if lo <= y <= hi else -math.inf

    def sampler(x: float, rng: np.random.Generator) -> float:
        return lo + (hi - lo) * rng.random()

    return ProposalKernel(log_q=log_q, sampler=sampler, symmetric=True, name="uniform_independent")


def _evaluate(func: LogDensity, grid: np.ndarray) -> np.ndarray:
    return np.array([float(func(float(x))) for x in grid])


def _bin_masses(target: PartitionedTarget, grid_size: int) -> np.ndarray:
    # midpoint rule: cell centres never sit on a bin boundary
    edges = target.bin_edges
    cells = max(grid_size, 2)
    grids = [lo + (np.arange(cells) + 0.5) * (hi - lo) / cells for lo, hi in zip(edges, edges[1:])]
    logs = [_evaluate(target.log_density, grid) for grid in grids]
    finite_max = [values[np.isfinite(values)].max() for values in logs if np.isfinite(values).any()]
    if not finite_max:
        raise DiagnosticError(f"Log-density of '{target.name}' is non-finite on every bin")
    shift = max(finite_max)
    widths = np.diff(np.asarray(edges)) / cells
    return np.array([np.exp(values - shift).sum() * width for values, width in zip(logs, widths)])
