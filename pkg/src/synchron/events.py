"""First-class communication events and channels.

An event is an immutable value describing deferred communication: a flat,
ordered list of base events, each an atomic send or receive intent on one
channel plus a chain of post-synchronization functions.  Composition with
``choose`` and ``wrap`` always yields this canonical flat form; nesting never
survives construction.  List order is the deterministic priority order used
when more than one base could synchronize.

Event values own no runtime state.  Channels do: each carries two FIFO queues
of blocked process ids, and (when bound to a device driver) a bounded queue of
buffered driver messages.  Channel state is mutated only by the scheduler.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .errors import UsageError


class EventKind(Enum):
    SEND = "send"
    RECV = "recv"


@dataclass(frozen=True)
class BaseEvent:
    """An atomic send or receive intent on one channel.

    ``payload`` is absent (None) for RECV.  ``wraps`` is applied
    innermost-first, i.e. in registration order, after synchronization.
    Wrap functions run in the owning process, never in the scheduler, so they
    may themselves synchronize.
    """

    kind: EventKind
    channel: int
    payload: Any = None
    wraps: tuple = ()


@dataclass(frozen=True)
class Event:
    """A canonical, non-empty ordered list of base events."""

    bases: tuple[BaseEvent, ...]

    def __post_init__(self) -> None:
        if not self.bases:
            raise UsageError("an event must contain at least one base event")


def send_event(channel: int, payload: Any) -> Event:
    """Intent to send ``payload`` on ``channel``; no communication occurs."""
    return Event((BaseEvent(EventKind.SEND, channel, payload),))


def recv_event(channel: int) -> Event:
    """Intent to receive on ``channel``; no communication occurs."""
    return Event((BaseEvent(EventKind.RECV, channel),))


def choose(first: Event, *rest: Event) -> Event:
    """Combine events into one that synchronizes on whichever base is ready.

    Binary at heart; extra arguments fold left for convenience.  The result's
    base list is the concatenation of the inputs' base lists, preserving
    left-to-right priority.  Inputs are unmodified.
    """
    bases = list(first.bases)
    for ev in rest:
        bases.extend(ev.bases)
    return Event(tuple(bases))


def wrap(event: Event, fn: Callable[[Any], Any]) -> Event:
    """Append ``fn`` to the wrap chain of every base event.

    Wrapping distributes over choice: wrap(choose(a, b), f) has the same base
    list as choose(wrap(a, f), wrap(b, f)).
    """
    if not callable(fn):
        raise UsageError("wrap requires a callable")
    return Event(
        tuple(
            BaseEvent(b.kind, b.channel, b.payload, b.wraps + (fn,))
            for b in event.bases
        )
    )


@dataclass
class Channel:
    """Runtime channel state: identity plus queues of blocked process ids.

    At any instant at most one of sendq/recvq is non-empty; a matching pair
    would have synchronized already.  ``pending`` buffers driver messages and
    is only ever non-empty for driver-bound channels.
    """

    id: int
    sendq: deque = field(default_factory=deque)
    recvq: deque = field(default_factory=deque)
    driver: Optional[Any] = None  # DriverDescriptor once bound
    pending: deque = field(default_factory=deque)

    def purge(self, pid: int) -> None:
        """Drop every queue entry for ``pid`` (stale-entry hygiene)."""
        if pid in self.sendq:
            self.sendq = deque(p for p in self.sendq if p != pid)
        if pid in self.recvq:
            self.recvq = deque(p for p in self.recvq if p != pid)
