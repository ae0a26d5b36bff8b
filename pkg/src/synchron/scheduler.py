"""Process model and the hybrid cooperative/preemptive main loop.

Each user process is a plain callable running on its own greenlet; the only
suspension points are the synchronization calls on its API handle, which
switch back into the scheduler with a request and are later resumed with the
operation's result.  The scheduler is the sole authority on who runs:
exactly one process is ever live, computation takes zero virtual time, and
the clock advances only when nothing is runnable.

Messages (driver stimuli and alarms) due at the current instant are handled
one at a time between process resumptions.  That interleaving is what lets
an alarm preempt a process that was dispatched at the same instant, the
simulated analogue of a timer interrupt arriving mid-execution.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional

import greenlet

from . import sync_engine, timed_sync
from .errors import InternalError, ResourceError, UsageError
from .events import Channel, Event, EventKind, choose, recv_event, send_event, wrap
from .harness.trace import Trace
from .ll_bridge import Board, DriverDescriptor
from .time_subsystem import (
    MSG_ALARM,
    Message,
    StimulusQueue,
    VirtualClock,
    WORD_MASK,
    advance_to_next_event,
)
from .timed_sync import MAX_DEADLINE, handle_alarm, sync_t_admit

log = logging.getLogger("synchron")

_FINISHED = object()


class ProcState(Enum):
    READY = "ready"
    RUNNING = "running"
    BLOCKED = "blocked"
    WAITING = "waiting"
    FINISHED = "finished"


@dataclass(frozen=True)
class ExternalThreadId:
    """Opaque handle returned by spawn_external, for symmetry with spawn."""

    driver: int
    channel: int


@dataclass
class Context:
    """A suspended user process: resumable program point plus clock registers."""

    pid: int
    body: Callable
    args: tuple = ()
    state: ProcState = ProcState.READY
    T_local: int = 0
    deadline: int = MAX_DEADLINE
    glet: Optional[Any] = None
    remembered_event: Optional[Event] = None  # set while blocked on channels
    pending_sync: Optional[Event] = None  # event to sync on next dispatch
    inbound: Optional[tuple] = None  # (base, value) to resume with


class Api:
    """The process-facing API handle.

    Event construction and process/channel creation are plain calls; ``sync``
    and ``sync_t`` are the suspension points.  Wrap chains run here, in the
    calling process, after it is resumed, so wrap functions may themselves
    synchronize.
    """

    def __init__(self, runtime: "Runtime"):
        self._rt = runtime

    def channel(self) -> int:
        return self._rt.new_channel()

    def send(self, chan: int, payload: Any) -> Event:
        self._rt.check_channel(chan)
        return send_event(chan, payload)

    def recv(self, chan: int) -> Event:
        self._rt.check_channel(chan)
        return recv_event(chan)

    choose = staticmethod(choose)
    wrap = staticmethod(wrap)

    def spawn(self, body: Callable, *args) -> int:
        return self._rt.spawn(body, args)

    def spawn_external(self, chan: int, driver: int) -> ExternalThreadId:
        return self._rt.spawn_external(chan, driver)

    def sync(self, event: Event) -> Any:
        sync_engine.validate_event(self._rt, event)
        base, value = self._rt.suspend(("sync", event))
        for fn in base.wraps:
            value = fn(value)
        return value

    def sync_t(self, baseline: int, deadline: int, event: Event) -> Any:
        if not isinstance(baseline, int) or not isinstance(deadline, int):
            raise UsageError("baseline and deadline must be integer tick counts")
        if baseline < 0 or deadline < 0:
            raise UsageError("baseline and deadline must be non-negative")
        sync_engine.validate_event(self._rt, event)
        base, value = self._rt.suspend(("sync_t", baseline, deadline, event))
        for fn in base.wraps:
            value = fn(value)
        return value


class Runtime:
    """The deterministic virtual-time runtime core.

    Owns all mutable state: contexts, channels, drivers, clock, queues and
    the trace.  Everything happens inside ``run_loop``'s execution context;
    the one external entry point safe to call from elsewhere is
    ``inject_stimulus`` via the loop-owned message queue.
    """

    READY = ProcState.READY
    RUNNING = ProcState.RUNNING
    BLOCKED = ProcState.BLOCKED
    WAITING = ProcState.WAITING
    FINISHED = ProcState.FINISHED

    def __init__(self, board: Optional[Board] = None, clock_hz: Optional[int] = None,
                 epsilon_ticks: int = 2, debug: bool = False,
                 max_processes: int = 16, max_channels: int = 64,
                 driver_queue_depth: int = 16):
        board = board if board is not None else Board()
        self.board = board
        self.inbox: deque[Message] = deque()
        self.clock = VirtualClock(clock_hz or board.clock_hz, emit=self.inbox.append)
        self.epsilon = epsilon_ticks
        self.debug = debug
        self.max_processes = max_processes
        self.max_channels = max_channels
        self.driver_queue_depth = driver_queue_depth
        self.log = log

        self.channels: list[Channel] = []
        self.contexts: list[Context] = []
        self.drivers = [DriverDescriptor(i, kind) for i, kind in enumerate(board.drivers)]
        self.readyq: deque[int] = deque()
        self.waitq: list[timed_sync.WaitEntry] = []
        self.wait_seq = 0
        self.current: Optional[int] = None
        self.stimuli = StimulusQueue()
        self.trace = Trace()
        self.api = Api(self)

        self.stop_reason: Optional[str] = None
        self.deadlock_report: Optional[str] = None
        self._sched_glet = None
        self._spawned = 0
        self._audit_failures: list[str] = []

    # -- time ----------------------------------------------------------------

    @property
    def now(self) -> int:
        return self.clock.now_ticks()

    # -- construction-side API -------------------------------------------------

    def check_channel(self, chan: int) -> None:
        if not isinstance(chan, int) or not 0 <= chan < len(self.channels):
            raise UsageError(f"unknown channel {chan}")

    def new_channel(self) -> int:
        if len(self.channels) >= self.max_channels:
            raise ResourceError(f"channel capacity ({self.max_channels}) exceeded")
        ch = Channel(id=len(self.channels))
        self.channels.append(ch)
        return ch.id

    def spawn(self, body: Callable, args: tuple = ()) -> int:
        if not callable(body):
            raise UsageError("process body must be callable")
        if self.contexts and self._spawned >= self.max_processes:
            raise ResourceError(f"process capacity ({self.max_processes}) exceeded")
        pid = len(self.contexts)
        ctx = Context(pid=pid, body=body, args=tuple(args), T_local=self.now)
        self.contexts.append(ctx)
        if pid != 0:
            self._spawned += 1
        self.readyq.append(pid)
        self.trace.emit(self.now, "spawn", pid=pid)
        return pid

    def spawn_external(self, chan: int, driver: int) -> ExternalThreadId:
        self.check_channel(chan)
        if not isinstance(driver, int) or not 0 <= driver < len(self.drivers):
            raise UsageError(f"unknown driver {driver}")
        ch = self.channels[chan]
        drv = self.drivers[driver]
        if ch.driver is not None:
            raise UsageError(f"channel {chan} is already bound to driver {ch.driver.id}")
        if drv.bound_channel is not None:
            raise UsageError(f"driver {driver} is already bound to channel {drv.bound_channel}")
        ch.driver = drv
        drv.bound_channel = chan
        return ExternalThreadId(driver=driver, channel=chan)

    def inject_stimulus(self, driver: int, data: int, at: int) -> None:
        """Schedule a device event; the one externally callable entry point."""
        self.stimuli.schedule(at, driver, data)

    def schedule_stimuli(self, entries) -> None:
        for at, driver, data in entries:
            self.stimuli.schedule(at, driver, data)

    # -- suspension protocol ---------------------------------------------------

    def suspend(self, request: tuple):
        """Called from a process greenlet; resumes with (base, value)."""
        if self._sched_glet is None:
            raise UsageError("sync called outside a running simulation")
        return self._sched_glet.switch(request)

    def note_sync_completed(self, ctx: Context) -> None:
        """Deadline bookkeeping at the instant a process's sync completes."""
        if ctx.deadline != MAX_DEADLINE and self.now > ctx.deadline:
            lateness = min(self.now - ctx.deadline, WORD_MASK)
            self.trace.emit(self.now, "deadline_miss", pid=ctx.pid, data=lateness)
        ctx.deadline = MAX_DEADLINE

    def deliver_driver_data(self, msg: Message) -> None:
        """Route a driver message: wake one blocked receiver or buffer it."""
        drv = self.drivers[msg.sender_id] if 0 <= msg.sender_id < len(self.drivers) else None
        if drv is None or drv.bound_channel is None:
            self.trace.emit(self.now, "dropped_stimulus", driver=msg.sender_id,
                            data=msg.data)
            return
        ch = self.channels[drv.bound_channel]
        if ch.recvq:
            pid = ch.recvq[0]
            self.trace.emit(self.now, "driver_msg", pid=pid, driver=drv.id, data=msg.data)
            sync_engine.complete_blocked(self, pid, EventKind.RECV, ch.id, msg.data)
            self.readyq.append(pid)
        else:
            self.trace.emit(self.now, "driver_msg", driver=drv.id, data=msg.data)
            ch.pending.append(msg)
            if len(ch.pending) > self.driver_queue_depth:
                dropped = ch.pending.popleft()
                self.trace.emit(self.now, "driver_overflow", driver=drv.id,
                                data=dropped.data)

    # -- scheduler steps ---------------------------------------------------------

    def handle_msg(self, msg: Message) -> None:
        if msg.msg_type == MSG_ALARM:
            handle_alarm(self)
        else:
            self.deliver_driver_data(msg)

    def dispatch_new_process(self) -> None:
        pid = self.readyq.popleft()
        ctx = self.contexts[pid]
        ctx.state = ProcState.RUNNING
        self.current = pid

    def _materialize_due_event(self) -> bool:
        """Move one event due at the current instant into the inbox.

        Stimuli beat alarms on ties; this models interrupt arrival order and
        keeps the pair (wake by stimulus, preempt by alarm) constructible.
        """
        stim_at = self.stimuli.peek_time()
        if stim_at is not None and stim_at <= self.now:
            self.inbox.append(self.stimuli.pop_message())
            return True
        return self.clock.fire_due_alarm()

    def _make_entry(self, ctx: Context):
        def entry(_first):
            ctx.body(self.api, *ctx.args)
            return _FINISHED

        return entry

    def _run_current(self) -> None:
        """Resume the current process until its next suspension point."""
        ctx = self.contexts[self.current]
        if ctx.pending_sync is not None:
            event = ctx.pending_sync
            ctx.pending_sync = None
            sync_engine.perform_sync(self, ctx, event)
            return
        inbound = ctx.inbound
        ctx.inbound = None
        if ctx.glet is None:
            ctx.glet = greenlet.greenlet(self._make_entry(ctx))
        request = ctx.glet.switch(inbound)
        if request is _FINISHED or ctx.glet.dead:
            ctx.state = ProcState.FINISHED
            self.trace.emit(self.now, "finish", pid=ctx.pid)
            self.current = None
            return
        kind = request[0]
        if kind == "sync":
            sync_engine.perform_sync(self, ctx, request[1])
        elif kind == "sync_t":
            sync_t_admit(self, ctx, request[1], request[2], request[3])
        else:
            raise InternalError(f"unknown suspension request {kind!r}")

    def next_event_time(self) -> Optional[int]:
        times = []
        if self.clock.armed_alarm is not None:
            times.append(self.clock.armed_alarm)
        stim = self.stimuli.peek_time()
        if stim is not None:
            times.append(stim)
        return min(times) if times else None

    def due_now(self) -> bool:
        """True when an alarm or stimulus is pending at the current instant."""
        nxt = self.next_event_time()
        return nxt is not None and nxt <= self.now

    def attach_scheduler(self) -> None:
        """Mark the calling greenlet as the scheduler context.

        ``run_loop`` does this implicitly; external drivers that call
        ``step`` directly (the live panel server) must do it once first.
        """
        self._sched_glet = greenlet.getcurrent()

    def step(self, until: Optional[int] = None) -> bool:
        """Execute one scheduler step; False when the run is over.

        Order per instant: handle a queued message, dispatch a ready process,
        surface an event due now, resume the current process.  Only when none
        of those apply does virtual time advance.
        """
        if self.stop_reason is not None:
            return False
        if self.inbox:
            self.handle_msg(self.inbox.popleft())
        elif self.current is None and self.readyq:
            self.dispatch_new_process()
        elif self._materialize_due_event():
            pass
        elif self.current is not None:
            self._run_current()
        else:
            nxt = self.next_event_time()
            if nxt is None:
                self._halt_quiescent()
                return False
            if until is not None and nxt > until:
                self.stop_reason = "limit"
                return False
            msg = advance_to_next_event(self.clock, self.stimuli)
            self.inbox.append(msg)
        if self.debug:
            self.audit()
        return True

    def _halt_quiescent(self) -> None:
        if all(c.state is ProcState.FINISHED for c in self.contexts):
            self.stop_reason = "finished"
            return
        lines = []
        for ctx in self.contexts:
            if ctx.state is ProcState.BLOCKED:
                chans = sorted(
                    ch.id for ch in self.channels
                    if ctx.pid in ch.sendq or ctx.pid in ch.recvq
                )
                lines.append(f"process {ctx.pid} blocked on channels {chans}")
        self.deadlock_report = "deadlock: " + "; ".join(lines)
        self.trace.emit(self.now, "deadlock")
        self.stop_reason = "deadlock"
        log.warning(self.deadlock_report)

    def run_loop(self, until: Optional[int] = None,
                 max_steps: Optional[int] = None) -> Trace:
        """Drive the scheduler to completion, a deadlock, or the tick limit."""
        if not self.contexts:
            raise UsageError("run_loop requires at least one spawned process")
        self.attach_scheduler()
        steps = 0
        while self.step(until=until):
            steps += 1
            if max_steps is not None and steps >= max_steps:
                self.stop_reason = "steps"
                break
        self._reap()
        return self.trace

    def run(self, main: Callable, *args, until: Optional[int] = None,
            max_steps: Optional[int] = None) -> Trace:
        """Spawn ``main`` as process 0 and run the loop."""
        self.spawn(main, args)
        return self.run_loop(until=until, max_steps=max_steps)

    def _reap(self) -> None:
        # Unfinished greenlets would otherwise linger until GC; kill them
        # deterministically so a finished run holds no live continuations.
        for ctx in self.contexts:
            if ctx.glet is not None and not ctx.glet.dead:
                ctx.glet.throw(greenlet.GreenletExit)

    # -- debug audits --------------------------------------------------------

    def audit(self) -> None:
        """Structural invariants, checked after every step in debug mode."""
        # Channel queues count as one location collectively: a composite
        # event parks its owner on several channels at once.
        locations: dict[int, set[str]] = {}

        def note(pid: int, where: str) -> None:
            locations.setdefault(pid, set()).add(where)

        for pid in self.readyq:
            note(pid, "readyq")
        for entry in self.waitq:
            note(entry.pid, "waitq")
        for ch in self.channels:
            for pid in list(ch.sendq) + list(ch.recvq):
                note(pid, "channels")
            if ch.sendq and ch.recvq:
                self._audit_fail(
                    f"channel {ch.id} holds blocked senders and receivers at once"
                )
            if ch.pending and ch.driver is None:
                self._audit_fail(f"channel {ch.id} buffers driver data while unbound")
        if self.current is not None:
            note(self.current, "current")

        for pid, where in locations.items():
            if len(where) > 1:
                self._audit_fail(f"process {pid} appears in {sorted(where)}")

        for ctx in self.contexts:
            places = locations.get(ctx.pid, set())
            if ctx.state is not ProcState.BLOCKED and "channels" in places:
                self._audit_fail(
                    f"process {ctx.pid} ({ctx.state.value}) lingers on a channel queue"
                )
            if ctx.state is ProcState.RUNNING and self.current != ctx.pid:
                self._audit_fail(f"process {ctx.pid} marked running but not current")

        for a, b in zip(self.waitq, self.waitq[1:]):
            if (a.wakeup, a.seq) > (b.wakeup, b.seq):
                self._audit_fail("waitq not sorted by wakeup/insertion order")

        # Earliest-deadline-first: among runnable processes with finite
        # deadlines, one with the tightest deadline must be the one running
        # (ties keep whichever is already current).
        if self.current is not None:
            runnable = [self.contexts[p] for p in self.readyq]
            runnable.append(self.contexts[self.current])
            finite = [c for c in runnable if c.deadline != MAX_DEADLINE]
            if len(finite) >= 2:
                best = min(c.deadline for c in finite)
                if self.contexts[self.current].deadline > best:
                    self._audit_fail(
                        f"EDF violated: a runnable process with deadline {best} "
                        f"is waiting behind process {self.current}"
                    )

    def _audit_fail(self, message: str) -> None:
        self._audit_failures.append(message)
        raise InternalError(f"audit: {message}")
