from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import bin_pairs
from .errors import ConfigurationError, TraceFormatError, UnsupportedError
from .traces import RunTrace
from .updates import Number, UpdateRule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrequencyTrace:
    """Running visit proportions nu_t(i)/t at every recorded time."""

    times: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self) -> None:
        if self.frequencies.ndim != 2 or self.frequencies.shape[0] != self.times.size:
            raise TraceFormatError("Frequency matrix must have one row per recorded time")
        if not np.allclose(self.frequencies.sum(axis=1), 1.0, atol=1e-9):
            raise TraceFormatError("Visit counts do not add up to the iteration index")

    @property
    def final(self) -> np.ndarray:
        return self.frequencies[-1]


@dataclass(frozen=True)
class LimitPrediction:
    values: tuple[Number, ...]

    def __post_init__(self) -> None:
        if any(not 0 < value < 1 for value in self.values):
            raise ConfigurationError(f"Predicted frequencies must lie in (0, 1), got {self.values}")

    @property
    def first(self) -> Number:
        return self.values[0]

    def as_array(self) -> np.ndarray:
        return np.asarray([float(value) for value in self.values])

    def formatted(self, digits: int = 6) -> str:
        return " ".join(f"{float(value):.{digits}f}" for value in self.values)


def predict_limit(rule: UpdateRule, phi: Sequence[Number], gamma: Number) -> LimitPrediction:
    """Long-run frequency of bin 1 implied by the two-bin balance of the +a / -b increments.

    With ``Fraction`` inputs the Linear rule is evaluated exactly and returns ``phi`` itself.
    """
    if len(phi) != 2:
        raise UnsupportedError(f"The limit formula is only available for two bins, got d = {len(phi)}", field="phi")
    rule = UpdateRule.from_name(rule)
    rule.validate(phi, gamma)
    phi1, phi2 = phi
    f = rule.f
    numerator = f(1, phi2, gamma) - f(0, phi1, gamma)
    denominator = f(1, phi1, gamma) - f(0, phi1, gamma) + f(1, phi2, gamma) - f(0, phi2, gamma)
    limit = numerator / denominator
    return LimitPrediction((limit, 1 - limit))


def linear_limit(phi: Sequence[Number]) -> LimitPrediction:
    """For any number of bins the Linear update drives visit frequencies to phi."""
    return LimitPrediction(tuple(phi))


def frequency_trace(trace: RunTrace) -> FrequencyTrace:
    if trace.record_count == 0:
        raise TraceFormatError("Trace contains no records")
    times = trace.times.astype(float)
    return FrequencyTrace(times=trace.times.copy(), frequencies=trace.visits / times[:, None])


def empirical_limit(trace: RunTrace, burn_in: float = 0.5) -> np.ndarray:
    """Visit proportions over the records after the first ``burn_in`` fraction of iterations."""
    if not 0.0 <= burn_in < 1.0:
        raise ConfigurationError("burn_in must lie in [0, 1)", field="burn_in")
    if trace.record_count == 0:
        raise TraceFormatError("Trace contains no records")
    total = trace.times[-1]
    if burn_in == 0.0:
        return trace.visits[-1] / total
    start = int(np.searchsorted(trace.times, burn_in * total, side="left"))
    if start >= trace.record_count - 1:
        return trace.visits[-1] / total
    counts = trace.visits[-1] - trace.visits[start]
    return counts / (total - trace.times[start])


def z_trajectory(trace: RunTrace, i: int, j: int) -> np.ndarray:
    if i == j or not (1 <= i <= trace.d and 1 <= j <= trace.d):
        raise ConfigurationError(f"Need two distinct bins in 1..{trace.d}, got ({i}, {j})", field="bins")
    return trace.z_column(i, j)


def z_over_t(trace: RunTrace, i: int = 1, j: int = 2) -> float:
    """|Z_T^{(i,j)}| / T at the last record; tends to zero along converging runs."""
    return abs(float(z_trajectory(trace, i, j)[-1])) / float(trace.times[-1])


def replay_z(trace: RunTrace, rule: UpdateRule, phi: Sequence[float]) -> np.ndarray:
    """Recompute the Z columns from the recorded bins and gammas, starting at theta_0 = 1/d."""
    if trace.record_count == 0:
        raise TraceFormatError("Trace contains no records")
    if not np.array_equal(trace.times, np.arange(1, trace.record_count + 1)):
        raise TraceFormatError("Replay needs a trace recorded at every iteration (stride 1)")
    rule = UpdateRule.from_name(rule)
    d = trace.d
    pairs = bin_pairs(d)
    log_theta = [-math.log(d)] * d
    gamma = None
    hit: tuple[float, ...] = ()
    miss: tuple[float, ...] = ()
    replayed = np.empty((trace.record_count, len(pairs)))
    for row, (bin_index, step) in enumerate(zip(trace.bins.tolist(), trace.gammas.tolist())):
        if step != gamma:
            gamma = step
            hit, miss = rule.increments(phi, gamma)
        current = bin_index - 1
        log_theta = [value + (hit[k] if k == current else miss[k]) for k, value in enumerate(log_theta)]
        replayed[row] = [log_theta[a - 1] - log_theta[b - 1] for a, b in pairs]
    return replayed


def reconstruction_error(trace: RunTrace, rule: UpdateRule, phi: Sequence[float]) -> float:
    return float(np.max(np.abs(replay_z(trace, rule, phi) - trace.z)))


@dataclass(frozen=True)
class WaitingTimes:
    kappa: int
    replicas: int
    mean: float
    median: float
    max: float


@dataclass
class HittingSummary:
    rows: list[WaitingTimes]
    kappas: list[int]
    zero_fh: list[str] = field(default_factory=list)

    @property
    def min_kappa(self) -> int:
        return min(self.kappas)

    def row(self, kappa: int) -> WaitingTimes:
        for entry in self.rows:
            if entry.kappa == kappa:
                return entry
        raise KeyError(kappa)


def fh_hitting_stats(traces: Sequence[RunTrace]) -> HittingSummary:
    """Waiting times between consecutive flat-histogram events, pooled per kappa across replicas."""
    if not traces:
        raise ConfigurationError("At least one trace is required", field="traces")
    waits: dict[int, list[int]] = {}
    kappas: list[int] = []
    zero_fh: list[str] = []
    for index, trace in enumerate(traces):
        events = sorted(trace.fh_events, key=lambda event: event.kappa)
        kappas.append(len(events))
        if not events:
            zero_fh.append(trace.label or f"replica_{index}")
            continue
        previous = 0
        for event in events:
            waits.setdefault(event.kappa, []).append(event.t_global - previous)
            previous = event.t_global
    if zero_fh:
        logger.warning("%d of %d replicas never met the FH criterion: %s", len(zero_fh), len(traces), ", ".join(zero_fh))
    rows = [
        WaitingTimes(
            kappa=kappa,
            replicas=len(values),
            mean=float(np.mean(values)),
            median=float(np.median(values)),
            max=float(np.max(values)),
        )
        for kappa, values in sorted(waits.items())
    ]
    return HittingSummary(rows=rows, kappas=kappas, zero_fh=zero_fh)


def write_summary_csv(
    traces: Sequence[RunTrace],
    path: Path,
    prediction: LimitPrediction | None = None,
    burn_in: float = 0.5,
) -> None:
    """One row per replica: final and last-half frequencies, kappa and |Z_T/T|."""
    if not traces:
        raise ConfigurationError("At least one trace is required", field="traces")
    d = traces[0].d
    header = ["replica", "iterations", "kappa"]
    header += [f"freq_{i}" for i in range(1, d + 1)]
    header += [f"last_half_{i}" for i in range(1, d + 1)]
    header += ["z_over_t"]
    if prediction is not None:
        header += [f"predicted_{i}" for i in range(1, d + 1)]

    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", encoding="ascii", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for index, trace in enumerate(traces):
            fields = [str(index), str(int(trace.times[-1])), str(trace.kappa)]
            fields += [f"{value:.6f}" for value in trace.final_frequencies()]
            fields += [f"{value:.6f}" for value in empirical_limit(trace, burn_in)]
            fields += [f"{z_over_t(trace):.6e}"]
            if prediction is not None:
                fields += [f"{value:.6f}" for value in prediction.as_array()]
            handle.write(",".join(fields) + "\n")


def write_hitting_csv(summary: HittingSummary, path: Path) -> None:
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", encoding="ascii", newline="\n") as handle:
        handle.write("kappa,replicas,mean_wait,median_wait,max_wait\n")
        for row in summary.rows:
            handle.write(f"{row.kappa},{row.replicas},{row.mean:.6f},{row.median:.6f},{row.max:.0f}\n")
