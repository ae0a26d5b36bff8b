"""Append-only timestamped log of scheduler and driver actions.

The trace is the observable output of every run: identical program and
stimulus script must yield a byte-identical serialized trace.  Records are
serialized as JSON lines with a stable field order; absent fields are
omitted rather than written as nulls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from ..errors import UsageError

#: Record kinds, in no particular order.
KINDS = frozenset(
    {
        "spawn",
        "sync_begin",
        "block",
        "rendezvous",
        "driver_write",
        "driver_msg",
        "alarm",
        "preempt",
        "timed_enqueue",
        "deadline_miss",
        "driver_overflow",
        "dropped_stimulus",
        "deadlock",
        "finish",
    }
)

_FIELDS = ("t", "kind", "pid", "channel", "driver", "data")


@dataclass(frozen=True)
class TraceRecord:
    t: int
    kind: str
    pid: Optional[int] = None
    channel: Optional[int] = None
    driver: Optional[int] = None
    data: Optional[int] = None

    def to_json(self) -> str:
        out = {}
        for name in _FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return json.dumps(out, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TraceRecord":
        raw = json.loads(line)
        if raw.get("kind") not in KINDS:
            raise UsageError(f"unknown trace record kind {raw.get('kind')!r}")
        return cls(
            t=int(raw["t"]),
            kind=raw["kind"],
            pid=raw.get("pid"),
            channel=raw.get("channel"),
            driver=raw.get("driver"),
            data=raw.get("data"),
        )


class Trace:
    """In-memory record list with JSONL persistence."""

    def __init__(self):
        self.records: list[TraceRecord] = []
        self._subscribers: list = []

    def emit(self, t: int, kind: str, pid: Optional[int] = None,
             channel: Optional[int] = None, driver: Optional[int] = None,
             data: Optional[int] = None) -> TraceRecord:
        if self.records and t < self.records[-1].t:
            raise UsageError(f"trace time went backwards: {t} after {self.records[-1].t}")
        rec = TraceRecord(t, kind, pid, channel, driver, data)
        self.records.append(rec)
        for cb in self._subscribers:
            cb(rec)
        return rec

    def subscribe(self, callback) -> None:
        """Register a callback invoked with every new record as it appears."""
        self._subscribers.append(callback)

    def filter(self, kind: Optional[str] = None, driver: Optional[int] = None,
               channel: Optional[int] = None,
               pid: Optional[int] = None) -> list[TraceRecord]:
        out = []
        for rec in self.records:
            if kind is not None and rec.kind != kind:
                continue
            if driver is not None and rec.driver != driver:
                continue
            if channel is not None and rec.channel != channel:
                continue
            if pid is not None and rec.pid != pid:
                continue
            out.append(rec)
        return out

    def to_jsonl(self) -> str:
        return "".join(rec.to_json() + "\n" for rec in self.records)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_records(cls, records: Iterable[TraceRecord]) -> "Trace":
        trace = cls()
        trace.records = list(records)
        return trace

    @classmethod
    def load(cls, path: str) -> "Trace":
        trace = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    trace.records.append(TraceRecord.from_json(line))
        return trace

    def __len__(self) -> int:
        return len(self.records)
