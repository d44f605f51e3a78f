"""Append-only JSONL event log.

Every study mutation is one event with a monotonically increasing sequence
number; the study state can always be rebuilt by replaying the log from the
start. A log without a path is memory-only (used by tests and by services
that do not persist).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO


class StoreCorruptError(RuntimeError):
    """The event log could not be parsed; refuse to operate on it."""

    def __init__(self, path: Path, line_no: int, reason: str) -> None:
        super().__init__(
            f"event log {path} is corrupt at line {line_no}: {reason}. "
            f"Recovery: truncate the log to the last well-formed line "
            f"(every line is one standalone JSON event) and restart."
        )
        self.path = path
        self.line_no = line_no


class EventLog:
    def __init__(self, path: str | Path | None = None) -> None:
        self._path = Path(path) if path is not None else None
        self._events: list[dict] = []
        self._seq = 0
        self._handle: IO[str] | None = None
        if self._path is not None:
            if self._path.exists():
                self._load()
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self._path, "a", encoding="utf-8")

    def _load(self) -> None:
        assert self._path is not None
        with open(self._path, "r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StoreCorruptError(self._path, line_no, str(exc)) from exc
                if event.get("seq") != self._seq + 1:
                    raise StoreCorruptError(
                        self._path, line_no,
                        f"sequence gap: expected {self._seq + 1}, got {event.get('seq')}",
                    )
                self._events.append(event)
                self._seq = event["seq"]

    @property
    def path(self) -> Path | None:
        return self._path

    @property
    def last_seq(self) -> int:
        return self._seq

    def events(self) -> list[dict]:
        return list(self._events)

    def append(self, event_type: str, data: dict) -> dict:
        self._seq += 1
        event = {"seq": self._seq, "type": event_type, "data": data}
        self._events.append(event)
        if self._handle is not None:
            self._handle.write(json.dumps(event, separators=(",", ":")) + "\n")
            self._handle.flush()
        return event

    def close(self) -> None:
        if self._handle is not None:
            self._handle.flush()
            self._handle.close()
            self._handle = None
