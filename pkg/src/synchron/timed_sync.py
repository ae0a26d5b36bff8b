"""Timed synchronization: baseline/deadline admission and alarm handling.

A timed sync names a window relative to the caller's local clock: the
earliest instant synchronization may begin (baseline) and how much later it
must have started (deadline, 0 meaning none).  Admission either proceeds
immediately (zero or degenerate baselines) or parks the process on a wait
queue ordered by wakeup time and arms the wall-clock alarm.

When an alarm fires, the woken process's local clock jumps to its wakeup
instant and the process either runs at once, preempts a running process with
a later deadline (earliest deadline first), or queues behind it.  A missed
deadline is recorded in the trace, never signalled to the program.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass, field

from .errors import InternalError, UsageError
from .events import Event

#: Deadline register value for untimed work: beyond any 64-bit clock value,
#: so any finite deadline wins an earliest-deadline comparison.
MAX_DEADLINE = 1 << 64


@dataclass(order=True)
class WaitEntry:
    """One process waiting for its baseline instant."""

    wakeup: int
    seq: int  # insertion order; makes equal wakeups FIFO
    pid: int = field(compare=False)
    deadline_abs: int = field(compare=False)
    event: Event = field(compare=False)


def sync_t_admit(kernel, ctx, baseline: int, deadline: int, event: Event) -> None:
    """Admission step of a timed sync; ends with the caller off the CPU.

    Computes the absolute wakeup (local clock + baseline) and finish time,
    records the deadline register, then either re-queues the caller as ready
    (it will sync on next dispatch) or arms an alarm and joins the wait
    queue.  The immediate-path conditions are kept exactly as specified even
    though two of them cannot hold for non-negative inputs.
    """
    if baseline < 0 or deadline < 0:
        raise UsageError("baseline and deadline must be non-negative")

    t_wakeup = ctx.T_local + baseline
    if deadline == 0:
        t_finish = MAX_DEADLINE  # no deadline
    else:
        t_finish = t_wakeup + deadline
    ctx.deadline = t_finish

    t_abs = kernel.now
    baseline_absolute = t_abs + baseline
    deadline_absolute = t_abs + baseline + deadline
    cond1 = t_abs > deadline_absolute
    cond2 = (t_abs >= baseline_absolute) and (t_abs <= deadline_absolute)
    cond3 = baseline < kernel.epsilon

    if baseline == 0 or cond1 or cond2 or cond3:
        # Straight to the ready queue; the sync itself runs on next dispatch.
        ctx.pending_sync = event
        ctx.state = kernel.READY
        kernel.readyq.append(ctx.pid)
        kernel.current = None
        return

    kernel.wait_seq += 1
    entry = WaitEntry(t_wakeup, kernel.wait_seq, pid=ctx.pid,
                      deadline_abs=t_finish, event=event)
    insort(kernel.waitq, entry)
    kernel.trace.emit(kernel.now, "timed_enqueue", pid=ctx.pid)
    if kernel.waitq[0] is entry:
        # New earliest wakeup; an alarm at or before now fires synchronously.
        kernel.clock.set_wake_up(t_wakeup)
    ctx.state = kernel.WAITING
    kernel.current = None


def handle_alarm(kernel) -> None:
    """Wake the head of the wait queue and schedule it against the current
    process by earliest deadline first."""
    if not kernel.waitq:
        kernel.log.error("alarm fired with empty wait queue")
        if kernel.debug:
            raise InternalError("alarm fired with empty wait queue")
        return

    entry = kernel.waitq.pop(0)
    ctx = kernel.contexts[entry.pid]
    ctx.T_local = entry.wakeup
    ctx.pending_sync = entry.event
    kernel.trace.emit(kernel.now, "alarm", pid=entry.pid)

    if kernel.waitq:
        kernel.clock.set_wake_up(kernel.waitq[0].wakeup)

    if kernel.current is None:
        ctx.state = kernel.RUNNING
        kernel.current = ctx.pid
        return

    running = kernel.contexts[kernel.current]
    if ctx.deadline < running.deadline:
        # Preempt: the woken process has the tighter deadline.
        kernel.trace.emit(kernel.now, "preempt", pid=running.pid)
        running.state = kernel.READY
        kernel.readyq.append(running.pid)
        ctx.state = kernel.RUNNING
        kernel.current = ctx.pid
    else:
        ctx.state = kernel.READY
        kernel.readyq.append(ctx.pid)
        # Drift correction: pull the running process's local clock forward
        # to the alarm instant (never backwards).
        if entry.wakeup > running.T_local:
            running.T_local = entry.wakeup
