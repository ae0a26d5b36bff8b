"""Live panel server: the wire protocol behind ``synchron run --serve``.

Serves newline-delimited JSON messages over websockets.  Server to client:
``{"type":"board",...}`` once on connect, ``{"type":"snapshot",...}`` with
the current device fold, then one ``{"type":"trace",...}`` per trace record
as it happens.  Client to server: ``{"type":"press","driver":N,"data":W}``,
injected at the current virtual instant.

Only in serve mode is virtual time paced against the wall clock (scaled by
``speed``); batch runs never see this code.  A quiescent simulation idles
awaiting input instead of reporting deadlock, since a live panel is itself
a stimulus source.
"""

from __future__ import annotations

import asyncio
import json
import time
from typing import Optional, Sequence

from websockets.asyncio.server import serve as ws_serve

from ..ll_bridge import Board
from ..scheduler import Runtime
from . import programs

#: Scheduler steps executed per cooperative yield while work is pending.
_STEP_CHUNK = 256


def board_message(runtime: Runtime, case: str) -> str:
    return json.dumps(
        {
            "type": "board",
            "case": case,
            "clock_hz": runtime.clock.freq_hz,
            "drivers": [
                {"id": d.id, "kind": d.kind.value} for d in runtime.drivers
            ],
        },
        separators=(",", ":"),
    )


def snapshot_message(runtime: Runtime) -> str:
    return json.dumps(
        {
            "type": "snapshot",
            "t": runtime.now,
            "states": [
                {"driver": d.id, "kind": d.kind.value, "data": d.level}
                for d in runtime.drivers
            ],
        },
        separators=(",", ":"),
    )


class PanelServer:
    """One simulation, many viewers, one pace of virtual time."""

    def __init__(self, runtime: Runtime, case: str, until: Optional[int] = None,
                 speed: float = 1.0):
        self.runtime = runtime
        self.case = case
        self.until = until
        self.speed = speed
        self._queues: set[asyncio.Queue] = set()
        self._origin_wall = time.monotonic()
        self._origin_virt = runtime.now
        runtime.trace.subscribe(self._broadcast)

    def _broadcast(self, record) -> None:
        payload = record.to_json()
        message = '{"type":"trace",' + payload[1:]
        for queue in list(self._queues):
            queue.put_nowait(message)

    def _wall_to_virtual(self) -> int:
        elapsed = time.monotonic() - self._origin_wall
        return self._origin_virt + int(elapsed * self.runtime.clock.freq_hz * self.speed)

    def inject_press(self, driver: int, data: int) -> None:
        at = max(self.runtime.now, self._wall_to_virtual())
        self.runtime.inject_stimulus(driver, data, at)

    async def handler(self, websocket) -> None:
        queue: asyncio.Queue = asyncio.Queue()
        self._queues.add(queue)
        pump = asyncio.create_task(self._pump(websocket, queue))
        try:
            await websocket.send(board_message(self.runtime, self.case))
            await websocket.send(snapshot_message(self.runtime))
            async for raw in websocket:
                try:
                    msg = json.loads(raw)
                except ValueError:
                    continue
                if msg.get("type") == "press":
                    self.inject_press(int(msg["driver"]), int(msg["data"]))
        finally:
            self._queues.discard(queue)
            pump.cancel()

    @staticmethod
    async def _pump(websocket, queue: asyncio.Queue) -> None:
        while True:
            await websocket.send(await queue.get())

    async def drive(self) -> None:
        """Pace the scheduler: run pending work now, sleep toward the next
        timed event, idle when quiescent."""
        rt = self.runtime
        while True:
            if rt.stop_reason is not None:
                await asyncio.sleep(0.05)
                continue
            if rt.inbox or rt.current is not None or rt.readyq or rt.due_now():
                for _ in range(_STEP_CHUNK):
                    if not (rt.inbox or rt.current is not None or rt.readyq
                            or rt.due_now()):
                        break
                    if not rt.step(until=self.until):
                        break
                await asyncio.sleep(0)
                continue
            nxt = rt.next_event_time()
            if nxt is None:
                await asyncio.sleep(0.01)  # quiescent: wait for panel input
                continue
            if self.until is not None and nxt > self.until:
                rt.stop_reason = "limit"
                continue
            target = self._origin_wall + (nxt - self._origin_virt) / (
                rt.clock.freq_hz * self.speed
            )
            delay = target - time.monotonic()
            if delay > 0:
                await asyncio.sleep(min(delay, 0.02))
                continue
            rt.step(until=self.until)


async def _serve(server: PanelServer, host: str, port: int) -> None:
    server.runtime.attach_scheduler()
    async with ws_serve(server.handler, host, port) as sock:
        actual = sock.sockets[0].getsockname()[1]
        print(f"serving {server.case} on ws://{host}:{actual}", flush=True)
        await server.drive()


def serve_case(case: str, port: int, board: Optional[Board] = None,
               stimuli: Sequence[tuple] = (), until: Optional[int] = None,
               speed: float = 1.0, host: str = "127.0.0.1", **runtime_kwargs) -> None:
    """Build a case study and serve it live; blocks until interrupted."""
    runtime = programs.build_case_study(case, board=board, **runtime_kwargs)
    runtime.schedule_stimuli(stimuli)
    server = PanelServer(runtime, case, until=until, speed=speed)
    try:
        asyncio.run(_serve(server, host, port))
    except KeyboardInterrupt:
        pass
