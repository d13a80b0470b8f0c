from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
import json
from pathlib import Path
from typing import Any
import uuid

from .traces import TraceConfig


@dataclass(slots=True)
class RunRecord:
    """Index entry describing one invocation of an experiment."""

    id: str
    name: str
    status: str
    created_at: str
    updated_at: str
    config: dict[str, Any]
    files: list[str] = field(default_factory=list)


class ArtifactStore:
    """Output directory of an experiment: per-replica traces, summaries, figures and ``index.json``."""

    def __init__(self, output_dir: Path) -> None:
        self.output_dir = Path(output_dir).resolve()
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.output_dir / "index.json"
        if not self.index_path.exists():
            self._write_index({"runs": []})

    # ------------------------------------------------------------------
    # Paths
    # ------------------------------------------------------------------
    def trace_path(self, replica: int) -> Path:
        return self.output_dir / f"replica_{replica}_trace.csv"

    def fh_log_path(self, replica: int) -> Path:
        return self.output_dir / f"replica_{replica}_fh.csv"

    def trace_config(self, replica: int, stride: int, with_fh_log: bool) -> TraceConfig:
        return TraceConfig(
            stride=stride,
            trace_path=self.trace_path(replica),
            fh_log_path=self.fh_log_path(replica) if with_fh_log else None,
        )

    @property
    def summary_path(self) -> Path:
        return self.output_dir / "summary.csv"

    @property
    def hitting_path(self) -> Path:
        return self.output_dir / "hitting.csv"

    def figure_path(self, name: str) -> Path:
        return self.output_dir / f"{name}.svg"

    # ------------------------------------------------------------------
    # Index
    # ------------------------------------------------------------------
    def list_runs(self) -> list[RunRecord]:
        return [self._entry_to_record(entry) for entry in self._read_index().get("runs", [])]

    def get_run(self, run_id: str) -> RunRecord:
        for record in self.list_runs():
            if record.id == run_id:
                return record
        raise KeyError(f"Run '{run_id}' not found")

    def begin_run(self, name: str, config: dict[str, Any]) -> RunRecord:
        entry = {
            "id": uuid.uuid4().hex,
            "name": name,
            "status": "running",
            "created_at": _timestamp(),
            "updated_at": _timestamp(),
            "config": config,
            "files": [],
        }
        entries = self._read_index().get("runs", [])
        entries.append(entry)
        self._write_index({"runs": entries})
        return self._entry_to_record(entry)

    def finish_run(self, record: RunRecord, status: str, files: list[Path]) -> RunRecord:
        entries = self._read_index().get("runs", [])
        for entry in entries:
            if entry["id"] == record.id:
                entry["status"] = status
                entry["updated_at"] = _timestamp()
                entry["files"] = sorted(self._relative(path) for path in files if Path(path).exists())
                self._write_index({"runs": entries})
                return self._entry_to_record(entry)
        raise KeyError(f"Run '{record.id}' not found")

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------
    def _relative(self, path: Path) -> str:
        resolved = Path(path).resolve()
        try:
            return resolved.relative_to(self.output_dir).as_posix()
        except ValueError:
            return resolved.as_posix()

    def _entry_to_record(self, entry: dict[str, Any]) -> RunRecord:
        return RunRecord(
            id=entry["id"],
            name=entry.get("name", ""),
            status=entry.get("status", "unknown"),
            created_at=entry.get("created_at", ""),
            updated_at=entry.get("updated_at", ""),
            config=entry.get("config", {}),
            files=list(entry.get("files", [])),
        )

    def _read_index(self) -> dict[str, Any]:
        if not self.index_path.exists():
            return {"runs": []}
        return json.loads(self.index_path.read_text(encoding="utf-8"))

    def _write_index(self, payload: dict[str, Any]) -> None:
        self.index_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
