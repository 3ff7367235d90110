"""Event-sourced persistence: append-only JSONL files plus replay support.

The command log is the replay source of truth; events and alerts are also
materialized to their own append-only files. During replay all writes are
suppressed (the files already hold them).
"""

from __future__ import annotations

from pathlib import Path
from typing import IO, Any, Iterator, Optional

from .canonical import canonical_dumps, canonical_loads


class DataStore:
    """File layout under one data directory; no-op when directory is None."""

    def __init__(self, data_dir: Optional[Path]):
        self.data_dir = Path(data_dir) if data_dir else None
        self.replaying = False
        self._sinks: dict[str, IO[str]] = {}
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            (self.data_dir / "reports").mkdir(exist_ok=True)
            (self.data_dir / "outbox").mkdir(exist_ok=True)

    def path(self, name: str) -> Optional[Path]:
        return self.data_dir / name if self.data_dir else None

    @property
    def audit_path(self) -> Optional[Path]:
        return self.path("audit.jsonl")

    @property
    def reports_dir(self) -> Optional[Path]:
        return self.path("reports")

    @property
    def outbox_dir(self) -> Optional[Path]:
        return self.path("outbox")

    def _sink(self, name: str) -> Optional[IO[str]]:
        if self.data_dir is None or self.replaying:
            return None
        if name not in self._sinks:
            self._sinks[name] = open(self.data_dir / name, "a", encoding="utf-8")
        return self._sinks[name]

    def append_line(self, name: str, obj: Any, key_order=None) -> None:
        sink = self._sink(name)
        if sink is not None:
            sink.write(canonical_dumps(obj, key_order=key_order) + "\n")

    def append_raw(self, name: str, line: str) -> None:
        sink = self._sink(name)
        if sink is not None:
            sink.write(line + "\n")

    def flush(self, name: str) -> None:
        sink = self._sinks.get(name)
        if sink is not None:
            sink.flush()

    def flush_all(self) -> None:
        for sink in self._sinks.values():
            sink.flush()

    def iter_lines(self, name: str) -> Iterator[Any]:
        if self.data_dir is None:
            return
        path = self.data_dir / name
        if not path.exists():
            return
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield canonical_loads(line)

    def close(self) -> None:
        for sink in self._sinks.values():
            sink.close()
        self._sinks.clear()
