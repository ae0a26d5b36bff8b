"""The case-study programs, written against the runtime API.

Each program is a process body (or a main that spawns bodies) mirroring its
published form: the LED blinker on a one-second period, the button-mirroring
machines, the two-process tune player, the 1 kHz square-wave generator and a
software-only ping-pong.  ``run_case_study`` wires a program to its board,
replays an optional stimulus script and returns the trace.
"""

from __future__ import annotations

from typing import Optional, Sequence

from ..errors import UsageError
from ..events import choose, wrap
from ..ll_bridge import Board, DriverKind
from ..scheduler import Api, Runtime
from .analysis import fib_tailrec
from .trace import Trace

SEC = 1_000_000
MSEC = 1_000

#: Write intervals (ticks) of the six notes used by the tune, and the tune
#: itself: 28 notes with quarter (500 ms) and half (1000 ms) durations.
NOTE_G, NOTE_A, NOTE_B, NOTE_C, NOTE_D, NOTE_E = 2551, 2273, 2025, 1911, 1703, 1517

TWINKLE = (
    NOTE_G, NOTE_G, NOTE_D, NOTE_D, NOTE_E, NOTE_E, NOTE_D,
    NOTE_C, NOTE_C, NOTE_B, NOTE_B, NOTE_A, NOTE_A, NOTE_G,
    NOTE_D, NOTE_D, NOTE_C, NOTE_C, NOTE_B, NOTE_B, NOTE_A,
    NOTE_D, NOTE_D, NOTE_C, NOTE_C, NOTE_B, NOTE_B, NOTE_A,
)

_QN = 500 * MSEC
_HN = 1000 * MSEC
DURATIONS = (_QN, _QN, _QN, _QN, _QN, _QN, _HN) * 4


def _after(api: Api, t: int, event):
    """Synchronize no earlier than ``t`` ticks of local time from now."""
    return api.sync_t(t, 0, event)


# -- blinky ------------------------------------------------------------------

def blinky_main(api: Api, busy_work: int = 0) -> None:
    """Toggle the LED once per second, forever.

    ``busy_work`` inserts a pure computation before each timed send; being
    logical-zero-time it must not move any rendezvous.
    """
    ledchan = api.channel()
    api.spawn_external(ledchan, 1)
    val = 1
    while True:
        if busy_work:
            fib_tailrec(busy_work)
        api.sync_t(SEC, 1, api.send(ledchan, val))
        val = 1 - val


# -- button blinky -------------------------------------------------------------

def button_blinky_main(api: Api) -> None:
    """Copy the button state onto the LED via message passing."""
    butchan = api.channel()
    ledchan = api.channel()
    api.spawn_external(butchan, 0)
    api.spawn_external(ledchan, 1)

    def glowled(x):
        return api.sync(api.send(ledchan, x))

    while True:
        api.sync(wrap(api.recv(butchan), glowled))


# -- four-button blinky ----------------------------------------------------------

def four_button_main(api: Api) -> None:
    """Mirror each of four buttons onto the LED of the same index."""
    buts = [api.channel() for _ in range(4)]
    leds = [api.channel() for _ in range(4)]
    for i, ch in enumerate(buts):
        api.spawn_external(ch, i)
    for i, ch in enumerate(leds):
        api.spawn_external(ch, 4 + i)

    def mirror(ledchan):
        def handler(x):
            return api.sync(api.send(ledchan, x))
        return handler

    press = [wrap(api.recv(buts[i]), mirror(leds[i])) for i in range(4)]
    anybutton = choose(press[0], choose(press[1], choose(press[2], press[3])))
    while True:
        api.sync(anybutton)


# -- two-press state machine ------------------------------------------------------

def complex_fsm_main(api: Api) -> None:
    """Two-press sequences drive three LEDs, with an error LED for wrong pairs.

    Button 1 then 2 toggles LED1; button 3 then 4 toggles LED2; any other
    second press lands on the error LED3.  The second synchronization returns
    the LED channel to write, so the selection itself is first-class.
    """
    but = [api.channel() for _ in range(4)]
    led = [api.channel() for _ in range(4)]
    for i, ch in enumerate(but):
        api.spawn_external(ch, i)
    for i, ch in enumerate(led):
        api.spawn_external(ch, 4 + i)

    def error_led(_x):
        return led[2]

    fail1ev = choose(
        wrap(api.recv(but[0]), error_led),
        choose(wrap(api.recv(but[2]), error_led), wrap(api.recv(but[3]), error_led)),
    )
    fail2ev = choose(
        wrap(api.recv(but[0]), error_led),
        choose(wrap(api.recv(but[1]), error_led), wrap(api.recv(but[2]), error_led)),
    )

    def led1_handler(_x):
        return api.sync(choose(wrap(api.recv(but[1]), lambda _: led[0]), fail1ev))

    def led2_handler(_x):
        return api.sync(choose(wrap(api.recv(but[3]), lambda _: led[1]), fail2ev))

    state = 0
    while True:
        fsm1 = wrap(api.recv(but[0]), led1_handler)
        fsm2 = wrap(api.recv(but[2]), led2_handler)
        ch = api.sync(choose(fsm1, fsm2))
        api.sync(api.send(ch, 1 - state))
        state = 1 - state


# -- tune player ---------------------------------------------------------------

def player_p(api: Api, note_c: int) -> None:
    """Walk the tune, announcing each note after its predecessor's duration.

    After the 28th note the walk wraps: the first note is re-announced after
    the final (half-note) duration and the cycle restarts.
    """
    melody = list(TWINKLE[1:])
    nt = list(DURATIONS)
    n = 2
    while True:
        if n == 29:
            _after(api, nt[0], api.send(note_c, TWINKLE[0]))
            melody = list(TWINKLE[1:])
            nt = list(DURATIONS)
            n = 2
        else:
            _after(api, nt[0], api.send(note_c, melody[0]))
            melody = melody[1:]
            nt = nt[1:]
            n += 1


def tune_p(api: Api, dac_c: int, note_c: int, time_period: int, vol: int) -> None:
    """Drive the DAC square wave, switching rate whenever a note arrives."""
    while True:
        new_tp = _after(
            api,
            time_period,
            choose(
                api.recv(note_c),
                wrap(api.send(dac_c, vol * 4095), lambda _u, tp=time_period: tp),
            ),
        )
        time_period = new_tp
        vol = 1 - vol


def twinkle_main(api: Api) -> None:
    dac_c = api.channel()
    note_c = api.channel()
    api.spawn_external(dac_c, 0)
    api.spawn(tune_p, dac_c, note_c, TWINKLE[0], 1)
    api.spawn(player_p, note_c)


# -- square wave ----------------------------------------------------------------

def square_wave_main(api: Api) -> None:
    """1 kHz square wave: toggle the probe pin every 500 ticks."""
    ledchan = api.channel()
    api.spawn_external(ledchan, 1)
    val = 1
    while True:
        api.sync_t(500, 0, api.send(ledchan, val))
        val = 1 - val


# -- ping pong -------------------------------------------------------------------

def ping_pong_main(api: Api, rounds: int = 10) -> None:
    """Two software processes exchanging ``rounds`` messages on one channel."""
    ch = api.channel()

    def pinger(api: Api) -> None:
        for i in range(rounds):
            api.sync(api.send(ch, i))

    def ponger(api: Api) -> None:
        for _ in range(rounds):
            api.sync(api.recv(ch))

    api.spawn(pinger)
    api.spawn(ponger)


# -- wiring ---------------------------------------------------------------------

_B = DriverKind.BUTTON
_L = DriverKind.LED
_FOUR = [_B, _B, _B, _B, _L, _L, _L, _L]

#: name -> (main, default board drivers, required index->kind bindings)
CASES = {
    "blinky": (blinky_main, [_B, _L], {1: _L}),
    "button_blinky": (button_blinky_main, [_B, _L], {0: _B, 1: _L}),
    "four_button": (
        four_button_main,
        list(_FOUR),
        {i: (_B if i < 4 else _L) for i in range(8)},
    ),
    "complex_fsm": (
        complex_fsm_main,
        list(_FOUR),
        {i: (_B if i < 4 else _L) for i in range(8)},
    ),
    "twinkle": (twinkle_main, [DriverKind.DAC], {0: DriverKind.DAC}),
    "square_wave_1khz": (
        square_wave_main,
        [_B, DriverKind.GPIO_PROBE],
        {1: DriverKind.GPIO_PROBE},
    ),
    "ping_pong": (ping_pong_main, [], {}),
}


def case_names() -> list[str]:
    return sorted(CASES)


def default_board(name: str) -> Board:
    if name not in CASES:
        raise UsageError(f"unknown case study {name!r}; expected one of {case_names()}")
    return Board(drivers=list(CASES[name][1]))


def build_case_study(name: str, board: Optional[Board] = None,
                     **runtime_kwargs) -> Runtime:
    """Construct a runtime for a case study, spawning its main as process 0."""
    if name not in CASES:
        raise UsageError(f"unknown case study {name!r}; expected one of {case_names()}")
    main, _default, required = CASES[name]
    board = board if board is not None else default_board(name)
    for index, kind in required.items():
        if index >= len(board.drivers) or board.drivers[index] is not kind:
            raise UsageError(
                f"case {name} needs driver {index} to be {kind.value!r}; "
                f"board has {[k.value for k in board.drivers]}"
            )
    runtime = Runtime(board=board, **runtime_kwargs)
    runtime.spawn(main)
    return runtime


def run_case_study(name: str, board: Optional[Board] = None,
                   stimuli: Sequence[tuple] = (), until: Optional[int] = None,
                   max_steps: Optional[int] = None, **runtime_kwargs) -> Trace:
    """Build, stimulate and run one case study; returns its trace."""
    runtime = build_case_study(name, board=board, **runtime_kwargs)
    runtime.schedule_stimuli(stimuli)
    return runtime.run_loop(until=until, max_steps=max_steps)
