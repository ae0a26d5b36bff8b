"""Synchron: first-class events, message-passing I/O to virtual devices, and
timed synchronization on a deterministic virtual clock."""

from .errors import InternalError, ResourceError, SynchronError, UsageError
from .events import BaseEvent, Event, EventKind, choose, recv_event, send_event, wrap
from .ll_bridge import Board, DriverDescriptor, DriverKind, load_stimulus_file
from .scheduler import Api, Context, ExternalThreadId, ProcState, Runtime
from .time_subsystem import Message, StimulusQueue, VirtualClock
from .timed_sync import MAX_DEADLINE

__all__ = [
    "Api",
    "BaseEvent",
    "Board",
    "Context",
    "DriverDescriptor",
    "DriverKind",
    "Event",
    "EventKind",
    "ExternalThreadId",
    "InternalError",
    "MAX_DEADLINE",
    "Message",
    "ProcState",
    "ResourceError",
    "Runtime",
    "StimulusQueue",
    "SynchronError",
    "UsageError",
    "VirtualClock",
    "choose",
    "load_stimulus_file",
    "recv_event",
    "send_event",
    "wrap",
]
