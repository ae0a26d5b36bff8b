"""Virtual device drivers and the driver-to-runtime bridge.

Every device presents the same four-function surface (read / write /
readable / writeable) regardless of kind.  Synchronous devices (LED, DAC,
GPIO probe, UART stub) complete writes immediately; the button is
asynchronous and interrupt-like, producing data only through injected
stimuli.  Binding a channel to a driver makes the device look like an
external process reachable by ordinary message passing.

The board configuration enumerates drivers in order; the array index is the
driver id.  Stimulus scripts replay timed device input deterministically; a
live panel injects the same messages at the current instant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .errors import UsageError
from .time_subsystem import WORD_MASK


class DriverKind(Enum):
    LED = "led"
    BUTTON = "button"
    DAC = "dac"
    GPIO_PROBE = "gpio_probe"
    UART_STUB = "uart_stub"


#: Kinds whose writes complete immediately (no interrupt involved).
SYNCHRONOUS_KINDS = frozenset(
    {DriverKind.LED, DriverKind.DAC, DriverKind.GPIO_PROBE, DriverKind.UART_STUB}
)


@dataclass
class DriverDescriptor:
    """One virtual peripheral: identity, kind, binding and device state."""

    id: int
    kind: DriverKind
    bound_channel: Optional[int] = None
    level: int = 0  # last written word (LED on/off, DAC level)
    edges: list = field(default_factory=list)  # (t, level) history for probes

    @property
    def is_synchronous(self) -> bool:
        return self.kind in SYNCHRONOUS_KINDS


@dataclass
class Board:
    """Driver enumeration for one virtual target board."""

    clock_hz: int = 1_000_000
    drivers: list[DriverKind] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict) -> "Board":
        kinds = []
        for entry in raw.get("drivers", []):
            name = entry["kind"] if isinstance(entry, dict) else entry
            try:
                kinds.append(DriverKind(name))
            except ValueError:
                raise UsageError(f"unknown driver kind {name!r}") from None
        return cls(clock_hz=int(raw.get("clock_hz", 1_000_000)), drivers=kinds)

    @classmethod
    def from_file(cls, path: str) -> "Board":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "clock_hz": self.clock_hz,
            "drivers": [{"kind": k.value} for k in self.drivers],
        }


def load_stimulus_file(path: str) -> list[tuple[int, int, int]]:
    """Parse a stimulus script: JSON lines of {"at", "driver", "data"}.

    Entries are applied in time order, ties in file order.
    """
    entries: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                entries.append((int(raw["at"]), int(raw["driver"]), int(raw["data"])))
            except (ValueError, KeyError) as exc:
                raise UsageError(f"bad stimulus line {lineno}: {exc}") from None
    entries.sort(key=lambda e: e[0])  # stable: ties keep file order
    return entries


def check_word(value: Any) -> int:
    """Validate a 32-bit unsigned driver word."""
    if not isinstance(value, int) or isinstance(value, bool):
        raise UsageError(f"driver payload must be an integer, got {type(value).__name__}")
    if not 0 <= value <= WORD_MASK:
        raise UsageError(f"driver payload {value} does not fit in 32 bits")
    return value


def ll_data_writeable(driver: DriverDescriptor) -> int:
    """1 when a write would complete immediately, 0 for interrupt devices."""
    return 1 if driver.is_synchronous else 0


def ll_data_readable(driver: DriverDescriptor, channel) -> int:
    """Count of buffered words waiting to be read from ``driver``."""
    if channel is None:
        raise UsageError(f"driver {driver.id} is not bound to a channel")
    return len(channel.pending)


def ll_read(driver: DriverDescriptor, channel) -> int:
    """Pop the oldest buffered word; requires readable > 0."""
    if channel is None:
        raise UsageError(f"driver {driver.id} is not bound to a channel")
    if not channel.pending:
        raise UsageError(f"read from driver {driver.id} with nothing pending")
    return channel.pending.popleft().data


def apply_write(driver: DriverDescriptor, word: int, now: int) -> None:
    """Device-side effect of a completed synchronous write."""
    if driver.kind is DriverKind.LED:
        driver.level = 1 if word != 0 else 0
    elif driver.kind is DriverKind.DAC:
        driver.level = word
    elif driver.kind is DriverKind.GPIO_PROBE:
        driver.level = word
        driver.edges.append((now, word))
    elif driver.kind is DriverKind.UART_STUB:
        driver.level = word
    else:
        raise UsageError(f"cannot write to driver kind {driver.kind.value}")
