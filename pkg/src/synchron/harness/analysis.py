"""Trace analysis: write-rate arithmetic, jitter reports, FSM conformance.

Everything here consumes traces (live or loaded from JSONL) and never
touches runtime internals, so the same checks apply to a fresh run and to a
golden file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

from ..errors import UsageError
from .trace import Trace

#: One tick per microsecond at the canonical 1 MHz clock.
CLOCK_HZ = 1_000_000


def time_write(freq_hz: int) -> int:
    """Ticks between successive writes for a square wave at ``freq_hz``.

    Each output period needs two writes (high then low), so the write
    interval is half the period, rounded to the nearest tick.
    """
    if not isinstance(freq_hz, int) or freq_hz <= 0:
        raise UsageError("frequency must be a positive integer")
    return round(CLOCK_HZ / (2 * freq_hz))


def fib_tailrec(n: int) -> int:
    """Accumulator-style Fibonacci; pure busy work for load experiments."""
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


@dataclass(frozen=True)
class JitterReport:
    expected_period: int
    edge_count: int
    min_period: int
    max_period: int
    mean_period: float
    max_abs_deviation: int

    def to_dict(self) -> dict:
        return {
            "expected_period": self.expected_period,
            "edge_count": self.edge_count,
            "min_period": self.min_period,
            "max_period": self.max_period,
            "mean_period": self.mean_period,
            "max_abs_deviation": self.max_abs_deviation,
        }


def measure_jitter(trace: Trace, probe_driver: int, expected_period: int) -> JitterReport:
    """Deviation from true periodicity of a driver's write edges."""
    edges = [r.t for r in trace.filter(kind="driver_write", driver=probe_driver)]
    if len(edges) < 2:
        raise UsageError(
            f"need at least 2 edges on driver {probe_driver}, found {len(edges)}"
        )
    periods = [b - a for a, b in zip(edges, edges[1:])]
    return JitterReport(
        expected_period=expected_period,
        edge_count=len(edges),
        min_period=min(periods),
        max_period=max(periods),
        mean_period=sum(periods) / len(periods),
        max_abs_deviation=max(abs(p - expected_period) for p in periods),
    )


@dataclass(frozen=True)
class Divergence:
    """First point where a trace's writes depart from the model's."""

    index: int
    expected: Optional[tuple]
    actual: Optional[tuple]

    def __str__(self) -> str:
        return (
            f"divergence at write #{self.index}: expected {self.expected}, "
            f"got {self.actual}"
        )


def fsm_conformance(trace: Trace, fsm_spec: Union[dict, str]) -> Optional[Divergence]:
    """Replay the trace's driver inputs through a transition table and compare
    the writes the machine should have produced against the trace's writes.

    The table maps ``states × button inputs → next state + writes``::

        {
          "initial": "off",
          "states": {
            "off": {"0": {"next": "armed", "writes": [{"driver": 4, "data": 1}]}}
          }
        }

    An input key is the stimulus driver id; a write's ``data`` may be the
    literal word or ``"input"`` to echo the triggering message's data.
    Inputs with no table entry leave the state unchanged and emit nothing.
    Returns None on conformance, else the first divergence.
    """
    if isinstance(fsm_spec, str):
        with open(fsm_spec, "r", encoding="utf-8") as fh:
            fsm_spec = json.load(fh)

    state = fsm_spec["initial"]
    states = fsm_spec["states"]
    expected: list[tuple] = []
    for rec in trace.filter(kind="driver_msg"):
        entry = states.get(state, {}).get(str(rec.driver))
        if entry is None:
            continue
        for w in entry.get("writes", []):
            data = rec.data if w["data"] == "input" else w["data"]
            expected.append((rec.t, w["driver"], data))
        state = entry["next"]

    actual = [(r.t, r.driver, r.data) for r in trace.filter(kind="driver_write")]
    for i, (exp, act) in enumerate(zip(expected, actual)):
        if exp != act:
            return Divergence(i, exp, act)
    if len(expected) != len(actual):
        i = min(len(expected), len(actual))
        return Divergence(
            i,
            expected[i] if i < len(expected) else None,
            actual[i] if i < len(actual) else None,
        )
    return None
