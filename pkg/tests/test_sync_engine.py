"""Rendezvous, blocking, choice priority and driver-channel synchronization."""

import pytest

from synchron import Board, DriverKind, Runtime, UsageError, choose, wrap
from synchron.events import EventKind, recv_event, send_event
from synchron.sync_engine import find_synchronisable_event

BOARD = Board(drivers=[DriverKind.BUTTON, DriverKind.LED])


def trace_kinds(trace):
    return [(r.t, r.kind, r.pid) for r in trace.records]


def test_send_to_blocked_receiver():
    log = []

    def main(api):
        ch = api.channel()

        def receiver(api):
            log.append(("p2_got", api.sync(api.recv(ch))))

        def sender(api):
            log.append(("p1_sent", api.sync(api.send(ch, 42))))

        api.spawn(receiver)
        api.spawn(sender)

    rt = Runtime(debug=True)
    trace = rt.run(main)
    # The receiver (message receiver) continues first; the sender returns
    # unit once dequeued from the ready queue.
    assert log == [("p2_got", 42), ("p1_sent", None)]
    assert len(trace.filter(kind="rendezvous")) == 1


def test_recv_with_nobody_blocks_and_registers():
    def main(api):
        ch = api.channel()
        api.sync(api.recv(ch))

    rt = Runtime(debug=True)
    rt.run(main)
    assert rt.stop_reason == "deadlock"
    assert list(rt.channels[0].recvq) == [0]
    assert rt.trace.filter(kind="block")[0].pid == 0


@pytest.mark.parametrize("first_sender", ["a", "b"])
def test_choice_prefers_leftmost_base(first_sender):
    # Brute force over both completion orders: whichever sender blocked
    # first, a choice over (recv a, recv b) must take channel a.
    got = []

    def main(api):
        ch_a = api.channel()
        ch_b = api.channel()

        def send_a(api):
            api.sync(api.send(ch_a, "a"))

        def send_b(api):
            api.sync(api.send(ch_b, "b"))

        def chooser(api):
            got.append(api.sync(choose(api.recv(ch_a), api.recv(ch_b))))

        if first_sender == "a":
            api.spawn(send_a)
            api.spawn(send_b)
        else:
            api.spawn(send_b)
            api.spawn(send_a)
        api.spawn(chooser)

    rt = Runtime(debug=True)
    rt.run(main, max_steps=500)
    assert got == ["a"]


def test_find_synchronisable_event_scan_order():
    rt = Runtime(board=BOARD)
    sw = rt.new_channel()
    rt.new_channel()

    # Empty world: nothing synchronizable.
    assert find_synchronisable_event(rt, recv_event(sw)) is None
    assert find_synchronisable_event(rt, send_event(sw, 1)) is None

    # A blocked receiver makes the send base eligible.
    rt.channels[sw].recvq.append(7)
    base = find_synchronisable_event(rt, choose(recv_event(1), send_event(sw, 5)))
    assert base.kind is EventKind.SEND and base.channel == sw
    # Pure query: no state was mutated.
    assert list(rt.channels[sw].recvq) == [7]


def test_find_synchronisable_driver_cases():
    rt = Runtime(board=BOARD)
    but = rt.new_channel()
    led = rt.new_channel()
    rt.spawn_external(but, 0)
    rt.spawn_external(led, 1)

    # LED is a synchronous, always-writeable device.
    assert find_synchronisable_event(rt, send_event(led, 1)).channel == led
    # Button send never synchronizes; button recv needs a pending message.
    assert find_synchronisable_event(rt, send_event(but, 1)) is None
    assert find_synchronisable_event(rt, recv_event(but)) is None
    rt.channels[but].pending.append(object())
    assert find_synchronisable_event(rt, recv_event(but)).channel == but


def test_block_on_composite_registers_once_per_base():
    def main(api):
        ch0 = api.channel()
        ch1 = api.channel()
        api.sync(choose(api.send(ch0, 1), api.recv(ch1)))

    rt = Runtime(debug=True)
    rt.run(main)
    assert rt.stop_reason == "deadlock"
    assert list(rt.channels[0].sendq) == [0]
    assert list(rt.channels[1].recvq) == [0]


def test_blocked_receivers_queue_in_fifo_order():
    order = []

    def main(api):
        ch = api.channel()

        def r(api, name):
            order.append((name, api.sync(api.recv(ch))))

        def s(api):
            api.sync(api.send(ch, "first"))
            api.sync(api.send(ch, "second"))

        api.spawn(r, "r1")
        api.spawn(r, "r2")
        api.spawn(s)

    rt = Runtime(debug=True)
    rt.run(main, max_steps=500)
    assert order == [("r1", "first"), ("r2", "second")]


def test_send_to_synchronous_driver_continues_in_place():
    seen = []

    def main(api):
        led = api.channel()
        api.spawn_external(led, 1)
        api.sync(api.send(led, 1))
        seen.append("after_write")

    rt = Runtime(board=BOARD, debug=True)
    trace = rt.run(main)
    assert seen == ["after_write"]
    assert rt.stop_reason == "finished"
    writes = trace.filter(kind="driver_write", driver=1)
    assert [(r.t, r.data) for r in writes] == [(0, 1)]
    assert not trace.filter(kind="block")
    assert rt.drivers[1].level == 1


def test_recv_from_driver_with_pending_message():
    got = []

    def main(api):
        but = api.channel()
        api.spawn_external(but, 0)
        got.append(api.sync(api.recv(but)))

    rt = Runtime(board=BOARD, debug=True)
    rt.inject_stimulus(0, 1, at=100)
    rt.inject_stimulus(0, 0, at=100)  # buffered behind the first
    rt.run(main, until=200)
    assert got == [1]
    assert len(rt.channels[0].pending) == 1
    assert rt.channels[0].pending[0].data == 0


def test_stale_entries_purged_after_composite_completion():
    def main(api):
        ch_a = api.channel()
        ch_b = api.channel()

        def chooser(api):
            api.sync(choose(api.recv(ch_a), api.recv(ch_b)))

        def sender(api):
            api.sync(api.send(ch_a, 5))

        api.spawn(chooser)
        api.spawn(sender)

    rt = Runtime(debug=True)
    rt.run(main, max_steps=500)
    assert rt.stop_reason == "finished"
    for ch in rt.channels:
        assert 1 not in ch.sendq and 1 not in ch.recvq


def test_duplicate_bases_first_wins_and_both_purged():
    got = []

    def main(api):
        ch = api.channel()

        def chooser(api):
            got.append(api.sync(choose(
                wrap(api.recv(ch), lambda v: ("first", v)),
                wrap(api.recv(ch), lambda v: ("second", v)),
            )))

        def sender(api):
            api.sync(api.send(ch, 9))

        api.spawn(chooser)
        api.spawn(sender)

    rt = Runtime(debug=True)
    rt.run(main, max_steps=500)
    assert got == [("first", 9)]
    assert not rt.channels[0].recvq


def test_self_rendezvous_rejected():
    def main(api):
        ch = api.channel()
        api.sync(choose(api.send(ch, 1), api.recv(ch)))

    rt = Runtime()
    with pytest.raises(UsageError, match="rendezvous with itself"):
        rt.run(main)


def test_driver_channel_payload_must_be_32_bit_word():
    def bad_payload(api):
        led = api.channel()
        api.spawn_external(led, 1)
        api.sync(api.send(led, "on"))

    rt = Runtime(board=BOARD)
    with pytest.raises(UsageError, match="payload"):
        rt.run(bad_payload)

    def too_wide(api):
        led = api.channel()
        api.spawn_external(led, 1)
        api.sync(api.send(led, 1 << 32))

    rt = Runtime(board=BOARD)
    with pytest.raises(UsageError, match="32 bits"):
        rt.run(too_wide)


def test_wrap_chain_folds_over_base_result():
    # The value delivered by sync must equal the composition of the wrap
    # chain applied to the base result, compared against direct composition.
    f = lambda v: v + 1
    g = lambda v: v * 3
    got = []

    def main(api):
        ch = api.channel()

        def receiver(api):
            got.append(api.sync(wrap(wrap(api.recv(ch), f), g)))

        def sender(api):
            api.sync(api.send(ch, 5))

        api.spawn(receiver)
        api.spawn(sender)

    rt = Runtime(debug=True)
    rt.run(main, max_steps=500)
    assert got == [g(f(5))]


def test_wraps_may_synchronize_again():
    # A wrap body performing its own sync, as the LED-glow handler does.
    writes = []

    def main(api):
        but = api.channel()
        led = api.channel()
        api.spawn_external(but, 0)
        api.spawn_external(led, 1)

        def glow(x):
            api.sync(api.send(led, x))
            return x

        writes.append(api.sync(wrap(api.recv(but), glow)))

    rt = Runtime(board=BOARD, debug=True)
    rt.inject_stimulus(0, 1, at=50)
    trace = rt.run(main, until=100)
    assert writes == [1]
    assert [(r.t, r.data) for r in trace.filter(kind="driver_write", driver=1)] == [(50, 1)]


def test_rendezvous_conservation_on_software_channels():
    trace = None

    def main(api):
        ch = api.channel()

        def pinger(api):
            for i in range(10):
                api.sync(api.send(ch, i))

        def ponger(api):
            for _ in range(10):
                api.sync(api.recv(ch))

        api.spawn(pinger)
        api.spawn(ponger)

    rt = Runtime(debug=True)
    trace = rt.run(main, max_steps=2000)
    assert rt.stop_reason == "finished"
    rvs = trace.filter(kind="rendezvous", channel=0)
    assert [r.data for r in rvs] == list(range(10))


# --- selective communication over procedural abstractions -------------------
#
# A request/response protocol hidden behind an event-returning function can
# still participate in a choice: the send is the visible commitment point and
# the response pickup rides in the wrap.

def _client_call(api, req, resp, value):
    return wrap(api.send(req, value), lambda _ack: api.sync(api.recv(resp)))


def test_choice_between_two_service_protocols_takes_the_live_one():
    results = []

    def main(api):
        req1, resp1 = api.channel(), api.channel()
        req2, resp2 = api.channel(), api.channel()

        def server2(api):
            v = api.sync(api.recv(req2))
            api.sync(api.send(resp2, v * 10))

        def client(api):
            results.append(api.sync(choose(
                _client_call(api, req1, resp1, 7),   # nobody serves this one
                _client_call(api, req2, resp2, 7),
            )))

        api.spawn(server2)
        api.spawn(client)

    rt = Runtime(debug=True)
    rt.run(main, max_steps=1_000)
    assert rt.stop_reason == "finished"
    assert results == [70]
    # The dead protocol's request queue was purged after the live one won.
    assert not rt.channels[0].sendq


def test_choice_prefers_first_protocol_when_both_serve():
    results = []

    def main(api):
        req1, resp1 = api.channel(), api.channel()
        req2, resp2 = api.channel(), api.channel()

        def server(api, req, resp, factor):
            v = api.sync(api.recv(req))
            api.sync(api.send(resp, v * factor))

        def client(api):
            results.append(api.sync(choose(
                _client_call(api, req1, resp1, 7),
                _client_call(api, req2, resp2, 7),
            )))

        api.spawn(server, req1, resp1, 10)
        api.spawn(server, req2, resp2, 100)
        api.spawn(client)

    rt = Runtime(debug=True)
    rt.run(main, max_steps=1_000)
    assert results == [70]
