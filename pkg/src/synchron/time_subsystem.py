"""Virtual wall-clock: a 64-bit monotone timer built from a 32-bit counter.

The clock mimics the hardware arrangement it abstracts: a free-running 32-bit
counter (``lo``) plus an overflow count (``hi``), with ``now = hi * 2**32 +
lo``.  Hardware compare interrupts exist only on the low counter, so an alarm
in a later 32-bit window is deferred until the overflow handler for that
window arms the compare.  Virtual time is event-jumping: release-mode code
always jumps straight to the next interesting instant, faithfully replaying
any overflows crossed on the way.  A tick-by-tick stepper exists solely to
validate the overflow logic against the jump path.

An alarm requested at or before the current time fires immediately: the alarm
message is synthesized on the spot rather than lost in the past.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InternalError, UsageError

WORD = 1 << 32
WORD_MASK = WORD - 1

#: msg_type values carried by runtime messages.
MSG_DRIVER_DATA = 0
MSG_ALARM = 1

#: sender_id used by the alarm subsystem (drivers use their own ids).
ALARM_SENDER = 0xFFFFFFFF


@dataclass(frozen=True)
class Message:
    """Driver/alarm-to-runtime envelope."""

    sender_id: int
    msg_type: int
    data: int
    timestamp: int  # 64-bit tick count


class VirtualClock:
    """Monotone 64-bit tick counter with a single absolute alarm channel."""

    def __init__(self, freq_hz: int = 1_000_000,
                 emit: Optional[Callable[[Message], None]] = None):
        if freq_hz <= 0:
            raise UsageError("clock frequency must be positive")
        self.freq_hz = freq_hz
        self.lo = 0
        self.hi = 0
        self.armed_alarm: Optional[int] = None
        self.compare_armed = False
        self._emit = emit if emit is not None else (lambda msg: None)

    # -- queries -----------------------------------------------------------

    def now_ticks(self) -> int:
        return (self.hi << 32) | self.lo

    def clock_info(self) -> tuple[int, int]:
        """(configured frequency, number of alarm channels)."""
        return (self.freq_hz, 1)

    def alarm_status(self) -> tuple[bool, int]:
        if self.armed_alarm is None:
            return (False, 0)
        return (True, self.armed_alarm)

    # -- alarms ------------------------------------------------------------

    def set_wake_up(self, at: int) -> bool:
        """Arm the alarm for absolute tick ``at``.

        ``at`` at or before now fires synchronously.  The scheduler must only
        ever arm the earliest pending wakeup, so replacing an armed alarm with
        a later one is an internal error.
        """
        if at < 0:
            raise UsageError("alarm time must be non-negative")
        now = self.now_ticks()
        if at <= now:
            self.armed_alarm = None
            self.compare_armed = False
            self._emit(Message(ALARM_SENDER, MSG_ALARM, 0, at))
            return True
        if self.armed_alarm is not None and at > self.armed_alarm:
            raise InternalError(
                f"alarm re-armed later ({at}) than pending ({self.armed_alarm})"
            )
        self.armed_alarm = at
        self.compare_armed = (at >> 32) == self.hi
        return True

    def _fire(self) -> None:
        at = self.armed_alarm
        self.armed_alarm = None
        self.compare_armed = False
        self._emit(Message(ALARM_SENDER, MSG_ALARM, 0, at))

    def fire_due_alarm(self) -> bool:
        """Fire the armed alarm if its time has been reached; True if fired."""
        if self.armed_alarm is not None and self.armed_alarm <= self.now_ticks():
            self._fire()
            return True
        return False

    # -- advancement -------------------------------------------------------

    def _overflow(self) -> None:
        # The overflow interrupt handler: bump hi, then check whether the
        # armed alarm now falls inside the fresh 32-bit window.
        self.hi = (self.hi + 1) & WORD_MASK
        if self.armed_alarm is not None and (self.armed_alarm >> 32) == self.hi:
            self.compare_armed = True

    def jump_to(self, target: int) -> None:
        """Advance to absolute tick ``target``, replaying crossed overflows.

        Does not fire the alarm; callers decide when a due alarm is consumed.
        """
        now = self.now_ticks()
        if target < now:
            raise InternalError(f"clock cannot move backwards ({target} < {now})")
        while (target >> 32) > self.hi:
            self.lo = 0
            self._overflow()
        self.lo = target & WORD_MASK

    def tick(self) -> None:
        """Debug-only single-tick step; validates the overflow/jump logic."""
        self.lo += 1
        if self.lo == WORD:
            self.lo = 0
            self._overflow()
        if (
            self.armed_alarm is not None
            and self.compare_armed
            and self.now_ticks() == self.armed_alarm
        ):
            self._fire()


class StimulusQueue:
    """Scheduled device stimuli ordered by time, ties in submission order."""

    def __init__(self):
        self._items: list[tuple[int, int, int, int, int]] = []
        self._seq = 0

    def schedule(self, at: int, driver: int, data: int) -> None:
        if at < 0:
            raise UsageError("stimulus time must be non-negative")
        self._seq += 1
        item = (at, self._seq, driver, data & WORD_MASK, 0)
        # Submission order already ties earlier seq first; keep sorted.
        lo, hi = 0, len(self._items)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._items[mid][:2] <= item[:2]:
                lo = mid + 1
            else:
                hi = mid
        self._items.insert(lo, item)

    def peek_time(self) -> Optional[int]:
        return self._items[0][0] if self._items else None

    def pop_message(self) -> Message:
        at, _seq, driver, data, _ = self._items.pop(0)
        return Message(driver, MSG_DRIVER_DATA, data, at)

    def __len__(self) -> int:
        return len(self._items)


def advance_to_next_event(clock: VirtualClock,
                          stimuli: StimulusQueue) -> Optional[Message]:
    """Jump virtual time to the next alarm or stimulus and synthesize it.

    Returns None when nothing is pending (the deadlock signal).  On a tie the
    stimulus is delivered first and the alarm stays armed-and-due, to be fired
    by the scheduler's due-event check at the same instant.
    """
    alarm_at = clock.armed_alarm
    stim_at = stimuli.peek_time()
    if alarm_at is None and stim_at is None:
        return None
    if alarm_at is not None and (stim_at is None or alarm_at < stim_at):
        clock.jump_to(alarm_at)
        at = alarm_at
        clock.armed_alarm = None
        clock.compare_armed = False
        return Message(ALARM_SENDER, MSG_ALARM, 0, at)
    clock.jump_to(stim_at)
    return stimuli.pop_message()
