"""Timed synchronization: admission paths, alarms, preemption, local time."""

import pytest

from synchron import Board, DriverKind, MAX_DEADLINE, Runtime, UsageError
from synchron.errors import InternalError
from synchron.timed_sync import handle_alarm

BOARD = Board(drivers=[DriverKind.BUTTON, DriverKind.LED])


def led_writes(trace):
    return [(r.t, r.data) for r in trace.filter(kind="driver_write", driver=1)]


def test_periodic_timed_send_has_zero_jitter():
    # A driver-partner loop with baseline B rendezvouses at exact multiples
    # of B forever; untimed work in between never shifts the grid.
    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)
        val = 1
        while True:
            api.sync_t(1_000_000, 1, api.send(led, val))
            val = 1 - val

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=3_500_000)
    assert led_writes(trace) == [(1_000_000, 1), (2_000_000, 0), (3_000_000, 1)]


def test_khz_square_wave_500_tick_edges():
    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)
        val = 1
        while True:
            api.sync_t(500, 0, api.send(led, val))
            val = 1 - val

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=5_000)
    assert [t for t, _ in led_writes(trace)] == list(range(500, 5_001, 500))


def test_zero_baseline_equivalent_to_plain_sync():
    values = []

    def main(api):
        ch = api.channel()

        def receiver(api):
            values.append(api.sync_t(0, 0, api.recv(ch)))

        def sender(api):
            api.sync(api.send(ch, 11))

        api.spawn(receiver)
        api.spawn(sender)

    rt = Runtime(debug=True)
    trace = rt.run(main, max_steps=500)
    assert values == [11]
    # Immediate path: no alarm machinery involved.
    assert not trace.filter(kind="timed_enqueue")
    assert not trace.filter(kind="alarm")


def test_baseline_below_epsilon_skips_alarm_and_local_clock():
    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)
        api.sync_t(1, 0, api.send(led, 1))  # below epsilon=2
        api.sync_t(1_000, 0, api.send(led, 0))

    rt = Runtime(board=BOARD, epsilon_ticks=2, debug=True)
    trace = rt.run(main)
    # First write happens at t=0 (no alarm), local clock unchanged, so the
    # next wakeup is measured from local time 0.
    assert led_writes(trace) == [(0, 1), (1_000, 0)]
    assert len(trace.filter(kind="timed_enqueue")) == 1


def test_negative_times_rejected():
    def main(api):
        ch = api.channel()
        api.sync_t(-1, 0, api.recv(ch))

    with pytest.raises(UsageError):
        Runtime().run(main)


def test_untimed_operations_never_advance_local_clock():
    observed = []

    def main(api):
        ch = api.channel()

        def worker(api):
            rt = api._rt
            pid = rt.current
            api.sync(api.recv(ch))  # untimed
            observed.append(rt.contexts[pid].T_local)
            api.sync_t(700, 0, api.recv(ch))  # timed
            observed.append(rt.contexts[pid].T_local)

        def feeder(api):
            api.sync_t(500, 0, api.send(ch, 1))
            api.sync_t(500, 0, api.send(ch, 2))

        api.spawn(worker)
        api.spawn(feeder)

    rt = Runtime(debug=True)
    rt.run(main, until=10_000, max_steps=2000)
    # After the untimed recv (completed at t=500 by the feeder) the worker's
    # local clock still reads its spawn time; after its own timed sync it
    # reads exactly wakeup = 0 + 700.
    assert observed == [0, 700]


def test_two_wait_entries_chain_alarms_exactly():
    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)

        def t1(api):
            api.sync_t(1_000, 0, api.send(led, 1))

        def t2(api):
            api.sync_t(1_100, 0, api.send(led, 0))

        api.spawn(t1)
        api.spawn(t2)

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=5_000)
    assert [r.t for r in trace.filter(kind="alarm")] == [1_000, 1_100]
    assert led_writes(trace) == [(1_000, 1), (1_100, 0)]


def test_alarm_preempts_running_process_with_later_deadline():
    order = []

    def main(api):
        but = api.channel()
        led = api.channel()
        api.spawn_external(but, 0)
        api.spawn_external(led, 1)

        def untimed(api):
            api.sync(api.recv(but))
            order.append("untimed_resumed")

        def timed(api):
            api.sync_t(1_000, 500, api.send(led, 1))
            order.append("timed_done")

        api.spawn(untimed)
        api.spawn(timed)

    rt = Runtime(board=BOARD, debug=True)
    rt.inject_stimulus(0, 7, at=1_000)  # same instant as the timed wakeup
    trace = rt.run(main, until=2_000)
    preempts = trace.filter(kind="preempt")
    assert [(r.t, r.pid) for r in preempts] == [(1_000, 1)]
    assert order == ["timed_done", "untimed_resumed"]
    assert led_writes(trace) == [(1_000, 1)]


def test_no_preemption_when_running_deadline_is_tighter():
    order = []

    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)

        def tight(api):
            api.sync_t(1_000, 100, api.send(led, 1))
            order.append("tight")

        def loose(api):
            api.sync_t(1_000, 200, api.send(led, 0))
            order.append("loose")

        api.spawn(tight)
        api.spawn(loose)

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=2_000)
    assert not trace.filter(kind="preempt")
    assert order == ["tight", "loose"]


def test_same_instant_wakeup_with_tighter_deadline_preempts():
    order = []

    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)

        def loose(api):
            api.sync_t(1_000, 200, api.send(led, 0))
            order.append("loose")

        def tight(api):
            api.sync_t(1_000, 100, api.send(led, 1))
            order.append("tight")

        api.spawn(loose)  # wakes first (FIFO tie), then is preempted
        api.spawn(tight)

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=2_000)
    assert [(r.t, r.pid) for r in trace.filter(kind="preempt")] == [(1_000, 1)]
    assert order == ["tight", "loose"]


def test_deadline_tie_keeps_current_running():
    order = []

    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)

        def first(api):
            api.sync_t(1_000, 100, api.send(led, 1))
            order.append("first")

        def second(api):
            api.sync_t(1_000, 100, api.send(led, 0))
            order.append("second")

        api.spawn(first)
        api.spawn(second)

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=2_000)
    assert not trace.filter(kind="preempt")
    assert order == ["first", "second"]


def test_deadline_miss_recorded_not_signalled():
    def main(api):
        ch = api.channel()

        def sender(api):
            # Wants to start by t=1050; the partner only arrives at 2000.
            api.sync_t(1_000, 50, api.send(ch, 5))

        def receiver(api):
            api.sync_t(2_000, 0, api.recv(ch))

        api.spawn(sender)
        api.spawn(receiver)

    rt = Runtime(debug=True)
    trace = rt.run(main, until=3_000)
    assert rt.stop_reason == "finished"  # the program proceeds normally
    misses = trace.filter(kind="deadline_miss")
    assert [(r.t, r.pid, r.data) for r in misses] == [(2_000, 1, 950)]


def test_late_wakeup_alarm_in_past_fires_at_once():
    def main(api):
        ch = api.channel()
        led = api.channel()
        api.spawn_external(led, 1)

        def sender(api):
            api.sync_t(1_000, 0, api.send(ch, 1))
            # Rendezvous happened at t=5000 but local time reads 1000, so
            # this wakeup (local 2000) is already in the past.
            api.sync_t(1_000, 0, api.send(led, 1))

        def receiver(api):
            api.sync_t(5_000, 0, api.recv(ch))

        api.spawn(sender)
        api.spawn(receiver)

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=10_000)
    sender_alarms = [r.t for r in trace.filter(kind="alarm", pid=1)]
    assert sender_alarms == [1_000, 5_000]  # second alarm fires immediately
    assert led_writes(trace) == [(5_000, 1)]
    assert rt.contexts[1].T_local == 2_000  # local clock still jumped to wakeup


def test_local_time_never_exceeds_absolute_time():
    violations = []

    def main(api):
        ch = api.channel()

        def a(api):
            for _ in range(5):
                api.sync_t(700, 0, api.send(ch, 1))

        def b(api):
            for _ in range(5):
                api.sync_t(1_100, 0, api.recv(ch))

        api.spawn(a)
        api.spawn(b)

    rt = Runtime(debug=True)
    rt.trace.subscribe(
        lambda rec: violations.extend(
            c.pid for c in rt.contexts if c.T_local > rt.now
        )
    )
    rt.run(main, until=50_000, max_steps=5000)
    assert violations == []


def test_waitq_sorted_with_fifo_ties():
    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)
        for i in range(4):
            def body(api, i=i):
                api.sync_t(1_000, 0, api.send(led, i))
            api.spawn(body)

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main, until=2_000)
    # All four wake at 1000; service order equals spawn order.
    assert [r.data for r in trace.filter(kind="driver_write", driver=1)] == [0, 1, 2, 3]


def test_alarm_with_empty_waitq_is_internal_error():
    rt = Runtime(debug=True)
    with pytest.raises(InternalError):
        handle_alarm(rt)
    rt2 = Runtime(debug=False)
    handle_alarm(rt2)  # logged, not raised
