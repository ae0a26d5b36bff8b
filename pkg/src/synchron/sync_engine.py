"""Synchronization of events between processes and driver-bound channels.

The engine runs entirely inside the scheduler's execution context.  A sync
proceeds in three moves: search the event's base list for one that can
complete right now; if found, pass the message immediately; otherwise park
the caller on every involved channel queue and let another process run.

Completion discipline: the message receiver continues, the sender goes to
the ready queue, in both directions of initiation.  A send to a synchronous
driver completes in place (there is no peer process to hand control to).
On completion, every stale queue entry left by a composite event is purged,
so a finished process never lingers on any channel queue.
"""

from __future__ import annotations

from typing import Optional

from . import ll_bridge
from .errors import InternalError, UsageError
from .events import BaseEvent, Event, EventKind
from .time_subsystem import WORD_MASK, Message


def validate_event(kernel, event: Event) -> None:
    """Checks deferred to sync time: channel ids, self-rendezvous, payloads."""
    sends = set()
    recvs = set()
    for base in event.bases:
        if not 0 <= base.channel < len(kernel.channels):
            raise UsageError(f"unknown channel {base.channel}")
        if base.kind is EventKind.SEND:
            sends.add(base.channel)
            ch = kernel.channels[base.channel]
            if ch.driver is not None:
                ll_bridge.check_word(base.payload)
        else:
            recvs.add(base.channel)
    clash = sends & recvs
    if clash:
        raise UsageError(
            f"event sends and receives on the same channel {sorted(clash)}; "
            "a process cannot rendezvous with itself"
        )


def find_synchronisable_event(kernel, event: Event) -> Optional[BaseEvent]:
    """Return the first base (list order) that could complete now, if any.

    A send completes against a blocked receiver, or against a writeable
    synchronous driver; a receive completes against a blocked sender, or
    against a buffered driver message.  No state is mutated.
    """
    for base in event.bases:
        ch = kernel.channels[base.channel]
        if base.kind is EventKind.SEND:
            if ch.recvq:
                return base
            if ch.driver is not None and ll_bridge.ll_data_writeable(ch.driver):
                return base
        else:
            if ch.sendq:
                return base
            if ch.driver is not None and ch.pending:
                return base
    return None


def block_on(kernel, ctx, event: Event) -> None:
    """Park the caller on every channel named by the event, once per base."""
    for base in event.bases:
        ch = kernel.channels[base.channel]
        if base.kind is EventKind.SEND:
            ch.sendq.append(ctx.pid)
        else:
            ch.recvq.append(ctx.pid)
    ctx.remembered_event = event
    ctx.state = kernel.BLOCKED
    kernel.trace.emit(kernel.now, "block", pid=ctx.pid)


def purge_stale_entries(kernel, ctx) -> None:
    """Remove the process from every queue named by its remembered event."""
    event = ctx.remembered_event
    if event is None:
        return
    for base in event.bases:
        kernel.channels[base.channel].purge(ctx.pid)
    ctx.remembered_event = None


def complete_blocked(kernel, pid: int, kind: EventKind, channel_id: int, value):
    """Finish a blocked process's sync with the base matching kind+channel.

    The first matching base in list order wins (duplicates permitted).  The
    caller decides where the process runs next; here it only becomes ready.
    """
    ctx = kernel.contexts[pid]
    base = None
    for b in ctx.remembered_event.bases:
        if b.kind is kind and b.channel == channel_id:
            base = b
            break
    if base is None:
        raise InternalError(
            f"process {pid} not blocked with a {kind.value} base on channel {channel_id}"
        )
    purge_stale_entries(kernel, ctx)
    ctx.inbound = (base, value)
    ctx.state = kernel.READY
    kernel.note_sync_completed(ctx)
    return ctx


def sync_now(kernel, ctx, base: BaseEvent) -> None:
    """Perform the message passing for a base that can complete right now.

    ``ctx`` is the initiating (current) process.  Software send: the blocked
    receiver gets the message and becomes current, the sender is enqueued
    ready.  Software receive: the blocked sender is enqueued ready and the
    receiver continues with the message.  Driver cases route through the
    device instead of a peer.
    """
    ch = kernel.channels[base.channel]
    now = kernel.now

    if base.kind is EventKind.SEND:
        if ch.recvq:
            receiver_pid = ch.recvq[0]
            receiver = complete_blocked(
                kernel, receiver_pid, EventKind.RECV, ch.id, base.payload
            )
            kernel.trace.emit(
                now, "rendezvous", pid=receiver_pid, channel=ch.id,
                data=_traceable(base.payload),
            )
            ctx.inbound = (base, None)
            kernel.note_sync_completed(ctx)
            ctx.state = kernel.READY
            kernel.readyq.append(ctx.pid)
            receiver.state = kernel.RUNNING
            kernel.current = receiver_pid
            return
        drv = ch.driver
        if drv is not None and ll_bridge.ll_data_writeable(drv):
            word = ll_bridge.check_word(base.payload)
            ll_bridge.apply_write(drv, word, now)
            kernel.trace.emit(now, "driver_write", pid=ctx.pid, driver=drv.id, data=word)
            if drv.kind is ll_bridge.DriverKind.UART_STUB:
                # The stub echoes each write into its own readable queue.
                kernel.deliver_driver_data(Message(drv.id, 0, word, now))
            ctx.inbound = (base, None)
            kernel.note_sync_completed(ctx)
            return
        raise InternalError(f"send base on channel {ch.id} is not synchronizable")

    # RECV
    if ch.sendq:
        sender_pid = ch.sendq[0]
        sender_ctx = kernel.contexts[sender_pid]
        sbase = None
        for b in sender_ctx.remembered_event.bases:
            if b.kind is EventKind.SEND and b.channel == ch.id:
                sbase = b
                break
        if sbase is None:
            raise InternalError(f"sender {sender_pid} has no send base on channel {ch.id}")
        value = sbase.payload
        complete_blocked(kernel, sender_pid, EventKind.SEND, ch.id, None)
        kernel.trace.emit(
            now, "rendezvous", pid=ctx.pid, channel=ch.id, data=_traceable(value)
        )
        kernel.readyq.append(sender_pid)
        ctx.inbound = (base, value)
        kernel.note_sync_completed(ctx)
        return
    if ch.driver is not None and ch.pending:
        msg = ch.pending.popleft()
        ctx.inbound = (base, msg.data)
        kernel.note_sync_completed(ctx)
        return
    raise InternalError(f"recv base on channel {ch.id} is not synchronizable")


def perform_sync(kernel, ctx, event: Event) -> None:
    """The synchronization algorithm: complete now or block and yield."""
    kernel.trace.emit(kernel.now, "sync_begin", pid=ctx.pid)
    base = find_synchronisable_event(kernel, event)
    if base is None:
        block_on(kernel, ctx, event)
        kernel.current = None
    else:
        sync_now(kernel, ctx, base)


def _traceable(payload) -> Optional[int]:
    """Payloads are opaque host values; only 32-bit words enter the trace."""
    if isinstance(payload, bool) or not isinstance(payload, int):
        return None
    if 0 <= payload <= WORD_MASK:
        return payload
    return None
