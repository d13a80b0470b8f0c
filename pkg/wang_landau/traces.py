from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .core import bin_pairs
from .errors import ConfigurationError, TraceFormatError

_BASE_COLUMNS = ("t", "bin", "gamma", "kappa", "fh_event")
_POSITION_COLUMN = "x"
FH_LOG_HEADER = "kappa,t_global,gamma_before,gamma_after"


@dataclass(frozen=True)
class TraceConfig:
    stride: int = 1
    trace_path: Path | None = None
    fh_log_path: Path | None = None

    def __post_init__(self) -> None:
        if int(self.stride) < 1:
            raise ConfigurationError("Trace stride must be a positive integer", field="stride")


@dataclass(frozen=True)
class FHEvent:
    kappa: int
    t_global: int
    gamma_before: float
    gamma_after: float


@dataclass
class RunTrace:
    """Thinned per-iteration records of a Wang-Landau run plus its flat-histogram events.

    ``visits`` holds cumulative visit counts at each recorded time so running frequencies
    survive thinning; ``z`` holds Z^{(i,j)} for every pair i < j in ``pairs`` order.
    ``positions`` holds the chain's state x at each recorded time; NaN where it was not kept.
    """

    d: int
    stride: int
    iterations: int
    times: np.ndarray
    bins: np.ndarray
    gammas: np.ndarray
    kappas: np.ndarray
    fh_flags: np.ndarray
    visits: np.ndarray
    z: np.ndarray
    positions: np.ndarray
    fh_events: list[FHEvent] = field(default_factory=list)
    final_log_theta: np.ndarray | None = None
    label: str = ""

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return bin_pairs(self.d)

    @property
    def record_count(self) -> int:
        return int(self.times.size)

    @property
    def kappa(self) -> int:
        return len(self.fh_events)

    def z_column(self, i: int, j: int) -> np.ndarray:
        pairs = self.pairs
        if (i, j) in pairs:
            return self.z[:, pairs.index((i, j))]
        if (j, i) in pairs:
            return -self.z[:, pairs.index((j, i))]
        raise TraceFormatError(f"Trace has no Z column for bins ({i}, {j})")

    def final_frequencies(self) -> np.ndarray:
        return self.visits[-1] / self.times[-1]


def expected_record_count(iterations: int, stride: int) -> int:
    return math.ceil(iterations / stride)


def _required_columns(d: int) -> list[str]:
    columns = list(_BASE_COLUMNS)
    columns += [f"visits_{i}" for i in range(1, d + 1)]
    columns += [f"z_{i}_{j}" for i, j in bin_pairs(d)]
    return columns


def trace_header(d: int) -> str:
    return ",".join(_required_columns(d) + [_POSITION_COLUMN])


class TraceRecorder:
    """Collects thinned records in preallocated arrays and streams them to CSV when configured."""

    def __init__(self, d: int, iterations: int, config: TraceConfig | None = None, label: str = "") -> None:
        self.d = d
        self.iterations = iterations
        self.config = config or TraceConfig()
        self.stride = int(self.config.stride)
        self.label = label
        size = expected_record_count(iterations, self.stride)
        n_pairs = len(bin_pairs(d))
        self._pair_index = bin_pairs(d)
        self._times = np.zeros(size, dtype=np.int64)
        self._bins = np.zeros(size, dtype=np.int64)
        self._gammas = np.zeros(size)
        self._kappas = np.zeros(size, dtype=np.int64)
        self._flags = np.zeros(size, dtype=np.int64)
        self._visits = np.zeros((size, d), dtype=np.int64)
        self._z = np.zeros((size, n_pairs))
        self._positions = np.full(size, math.nan)
        self._count = 0
        self.fh_events: list[FHEvent] = []
        self._trace_handle: IO[str] | None = _open_csv(self.config.trace_path, trace_header(d))
        self._fh_handle: IO[str] | None = _open_csv(self.config.fh_log_path, FH_LOG_HEADER)

    def __enter__(self) -> "TraceRecorder":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def due(self, t: int) -> bool:
        return t % self.stride == 0 or t == self.iterations

    def record(
        self,
        t: int,
        bin_index: int,
        gamma: float,
        kappa: int,
        fh_flag: int,
        visits: Sequence[int],
        log_theta: Sequence[float],
        x: float = math.nan,
    ) -> None:
        row = self._count
        self._times[row] = t
        self._bins[row] = bin_index
        self._gammas[row] = gamma
        self._kappas[row] = kappa
        self._flags[row] = fh_flag
        self._visits[row] = visits
        z_values = [log_theta[i - 1] - log_theta[j - 1] for i, j in self._pair_index]
        self._z[row] = z_values
        self._positions[row] = x
        self._count += 1
        if self._trace_handle is not None:
            fields = [str(t), str(bin_index), f"{gamma:.17g}", str(kappa), str(fh_flag)]
            fields += [str(int(v)) for v in visits]
            fields += [f"{value:.17g}" for value in z_values]
            fields.append(f"{x:.17g}")
            self._trace_handle.write(",".join(fields) + "\n")

    def add_fh_event(self, kappa: int, t_global: int, gamma_before: float, gamma_after: float) -> None:
        self.fh_events.append(FHEvent(kappa, t_global, gamma_before, gamma_after))
        if self._fh_handle is not None:
            self._fh_handle.write(f"{kappa},{t_global},{gamma_before:.17g},{gamma_after:.17g}\n")

    def build(self, final_log_theta: Sequence[float] | None = None) -> RunTrace:
        n = self._count
        return RunTrace(
            d=self.d,
            stride=self.stride,
            iterations=self.iterations,
            times=self._times[:n].copy(),
            bins=self._bins[:n].copy(),
            gammas=self._gammas[:n].copy(),
            kappas=self._kappas[:n].copy(),
            fh_flags=self._flags[:n].copy(),
            visits=self._visits[:n].copy(),
            z=self._z[:n].copy(),
            positions=self._positions[:n].copy(),
            fh_events=list(self.fh_events),
            final_log_theta=None if final_log_theta is None else np.asarray(final_log_theta, dtype=float),
            label=self.label,
        )

    def close(self) -> None:
        for handle in (self._trace_handle, self._fh_handle):
            if handle is not None and not handle.closed:
                handle.flush()
                handle.close()


def _open_csv(path: Path | None, header: str) -> IO[str] | None:
    if path is None:
        return None
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    handle = destination.open("w", encoding="ascii", newline="\n")
    handle.write(header + "\n")
    return handle


def write_trace_csv(trace: RunTrace, path: Path) -> None:
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", encoding="ascii", newline="\n") as handle:
        handle.write(trace_header(trace.d) + "\n")
        for row in range(trace.record_count):
            fields = [
                str(int(trace.times[row])),
                str(int(trace.bins[row])),
                f"{trace.gammas[row]:.17g}",
                str(int(trace.kappas[row])),
                str(int(trace.fh_flags[row])),
            ]
            fields += [str(int(v)) for v in trace.visits[row]]
            fields += [f"{value:.17g}" for value in trace.z[row]]
            fields.append(f"{trace.positions[row]:.17g}")
            handle.write(",".join(fields) + "\n")


def write_fh_log(events: Sequence[FHEvent], path: Path) -> None:
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", encoding="ascii", newline="\n") as handle:
        handle.write(FH_LOG_HEADER + "\n")
        for event in events:
            handle.write(f"{event.kappa},{event.t_global},{event.gamma_before:.17g},{event.gamma_after:.17g}\n")


def read_trace_csv(path: Path, fh_log_path: Path | None = None, stride: int | None = None) -> RunTrace:
    """Load a trace written by the samplers; the stride is inferred from the first record if omitted."""
    source = Path(path)
    with source.open("r", encoding="ascii") as handle:
        header = handle.readline().strip()
        rows = [line.strip().split(",") for line in handle if line.strip()]
    columns = header.split(",")
    missing = [name for name in _BASE_COLUMNS if name not in columns]
    if missing:
        raise TraceFormatError(f"{source}: missing columns {', '.join(missing)}")
    visit_columns = [name for name in columns if name.startswith("visits_")]
    d = len(visit_columns)
    if d < 2:
        raise TraceFormatError(f"{source}: expected at least two visits_<i> columns")
    expected = _required_columns(d)
    absent = [name for name in expected if name not in columns]
    if absent:
        raise TraceFormatError(f"{source}: missing columns {', '.join(absent)}")
    if not rows:
        raise TraceFormatError(f"{source}: trace contains no records")
    index = {name: position for position, name in enumerate(columns)}
    try:
        data = {name: [row[index[name]] for row in rows] for name in expected}
        raw_positions = [row[index[_POSITION_COLUMN]] for row in rows] if _POSITION_COLUMN in index else None
    except IndexError as exc:
        raise TraceFormatError(f"{source}: truncated record") from exc

    try:
        times = np.asarray(data["t"], dtype=np.int64)
        bins = np.asarray(data["bin"], dtype=np.int64)
        gammas = np.asarray(data["gamma"], dtype=float)
        kappas = np.asarray(data["kappa"], dtype=np.int64)
        fh_flags = np.asarray(data["fh_event"], dtype=np.int64)
        visits = np.column_stack([np.asarray(data[name], dtype=np.int64) for name in visit_columns])
        z = np.column_stack([np.asarray(data[f"z_{i}_{j}"], dtype=float) for i, j in bin_pairs(d)])
        positions = np.full(len(rows), math.nan) if raw_positions is None else np.asarray(raw_positions, dtype=float)
    except ValueError as exc:
        raise TraceFormatError(f"{source}: non-numeric field") from exc
    inferred_stride = stride or int(times[0])
    trace = RunTrace(
        d=d,
        stride=inferred_stride,
        iterations=int(times[-1]),
        times=times,
        bins=bins,
        gammas=gammas,
        kappas=kappas,
        fh_flags=fh_flags,
        visits=visits,
        z=z,
        positions=positions,
        label=source.stem,
    )
    if fh_log_path is not None:
        trace.fh_events = read_fh_log(fh_log_path)
    return trace


def read_fh_log(path: Path) -> list[FHEvent]:
    source = Path(path)
    with source.open("r", encoding="ascii") as handle:
        header = handle.readline().strip()
        if header != FH_LOG_HEADER:
            raise TraceFormatError(f"{source}: unexpected FH log header '{header}'")
        events = []
        for line in handle:
            if not line.strip():
                continue
            fields = line.strip().split(",")
            if len(fields) != 4:
                raise TraceFormatError(f"{source}: expected 4 fields per FH event, got {len(fields)}")
            kappa, t_global, before, after = fields
            try:
                events.append(FHEvent(int(kappa), int(t_global), float(before), float(after)))
            except ValueError as exc:
                raise TraceFormatError(f"{source}: non-numeric field in FH event '{line.strip()}'") from exc
    return events
