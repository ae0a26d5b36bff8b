"""Reference transition tables for the state-machine case studies.

These tables are the conformance oracle: they are produced by a small,
self-contained model of each program's control flow, written directly from
the program text and never touching the runtime.  A table enumerates every
(state, button) pair a given set of input scripts can reach, so replaying a
trace through it is an independent check of the runtime's behaviour.

Driver numbering matches the case-study boards: buttons 0-3, LEDs 4-7.
"""

from __future__ import annotations

from typing import Iterable, Sequence

LED1, LED2, LED3, LED4 = 4, 5, 6, 7

#: Receive priority (base-list order) of each control-flow phase of the
#: two-press machine: the success button first, then the error buttons in
#: declaration order.  In the idle phase only the two entry buttons are
#: scanned.
_LISTEN = {
    "idle": (0, 2),
    "await1": (1, 0, 2, 3),
    "await2": (3, 0, 1, 2),
}


def four_button_table() -> dict:
    """Stateless mirror: a message on button i writes its value to LED i."""
    return {
        "initial": "s",
        "states": {
            "s": {
                str(i): {"next": "s", "writes": [{"driver": 4 + i, "data": "input"}]}
                for i in range(4)
            }
        },
    }


def _consume(phase: str, toggle: int, button: int, writes: list) -> tuple[str, int]:
    """Advance the two-press machine by one accepted button message."""
    if phase == "idle":
        return ("await1" if button == 0 else "await2"), toggle
    if phase == "await1":
        led = LED1 if button == 1 else LED3
    else:
        led = LED2 if button == 3 else LED3
    writes.append((led, 1 - toggle))
    return "idle", 1 - toggle


def complex_fsm_step(state: tuple, button: int) -> tuple[tuple, list]:
    """One delivered button message against the two-press machine.

    ``state`` is (phase, toggle, pending counts per button).  A message for a
    button the machine is not scanning is buffered; every phase entry drains
    buffered messages in scan order, which can cascade through several
    transitions.  Returns (next state, writes).
    """
    phase, toggle, pending = state
    pending = list(pending)
    writes: list = []
    if button in _LISTEN[phase]:
        phase, toggle = _consume(phase, toggle, button, writes)
    else:
        pending[button] += 1
    while True:
        for b in _LISTEN[phase]:
            if pending[b]:
                pending[b] -= 1
                phase, toggle = _consume(phase, toggle, b, writes)
                break
        else:
            break
    return (phase, toggle, tuple(pending)), writes


COMPLEX_FSM_INITIAL = ("idle", 0, (0, 0, 0, 0))


def _key(state: tuple) -> str:
    phase, toggle, pending = state
    return f"{phase}:{toggle}:" + "".join(str(n) for n in pending)


def complex_fsm_table(scripts: Iterable[Sequence[int]]) -> dict:
    """Transition table covering every state the given scripts reach.

    The machine's buffers make the full state space unbounded, so the table
    is built per script set; any table produced this way is closed over its
    scripts and usable with fsm_conformance.
    """
    states: dict = {}
    for script in scripts:
        state = COMPLEX_FSM_INITIAL
        for button in script:
            nxt, writes = complex_fsm_step(state, button)
            entry = {
                "next": _key(nxt),
                "writes": [{"driver": d, "data": v} for d, v in writes],
            }
            row = states.setdefault(_key(state), {})
            existing = row.get(str(button))
            if existing is None:
                row[str(button)] = entry
            elif existing != entry:
                raise AssertionError("reference model is nondeterministic")
            state = nxt
    return {"initial": _key(COMPLEX_FSM_INITIAL), "states": states}
