"""Network boundary: WebSocket and TCP line servers around one Session.

One operator at a time, whichever transport they pick: the browser console
speaks WebSocket text frames, scripted clients can use newline-delimited JSON
over plain TCP. Inbound messages go through the session's bounded queue and
are applied in arrival order by the simulation task; telemetry snapshots go
out at a fixed rate, stiffness bars and haptic cues on change.
"""

from __future__ import annotations

import asyncio
import contextlib

from websockets.asyncio.server import serve as ws_serve

from .protocol import ErrorMsg, ProtocolError, decode, encode
from .session import Session, SessionConfig


class _WsOperator:
    def __init__(self, websocket):
        self._ws = websocket

    async def send(self, text: str) -> None:
        await self._ws.send(text)


class _TcpOperator:
    def __init__(self, writer):
        self._writer = writer

    async def send(self, text: str) -> None:
        self._writer.write(text.encode("utf-8") + b"\n")
        await self._writer.drain()


class GatewayServer:
    """Owns the session, both listeners, and the sim/telemetry tasks."""

    def __init__(
        self,
        cfg: SessionConfig | None = None,
        host: str = "127.0.0.1",
        ws_port: int = 8765,
        tcp_port: int | None = None,
        rate: float | None = None,
        log_dir: str = "episodes",
        wall_tick: float = 0.01,
    ):
        self.cfg = cfg if cfg is not None else SessionConfig()
        self.session = Session(self.cfg, log_dir=log_dir)
        self.host = host
        self.ws_port = ws_port
        self.tcp_port = tcp_port
        self.rate = rate if rate is not None else self.cfg.telemetry_hz
        self.wall_tick = wall_tick
        self._operator = None
        self._ws_server = None
        self._tcp_server = None
        self._tasks: list = []

    # -- lifecycle -----------------------------------------------------------

    async def start(self) -> None:
        self._ws_server = await ws_serve(self._handle_ws, self.host, self.ws_port)
        self.ws_port = self._ws_server.sockets[0].getsockname()[1]
        if self.tcp_port is not None:
            self._tcp_server = await asyncio.start_server(self._handle_tcp, self.host, self.tcp_port)
            self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self._tasks = [
            asyncio.create_task(self._sim_loop()),
            asyncio.create_task(self._telemetry_loop()),
        ]

    async def stop(self) -> None:
        for task in self._tasks:
            task.cancel()
        for task in self._tasks:
            with contextlib.suppress(asyncio.CancelledError):
                await task
        self._tasks = []
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        self.session.close()

    async def run_forever(self) -> None:
        await self.start()
        try:
            await asyncio.Future()
        finally:
            await self.stop()

    # -- connections -----------------------------------------------------------

    def _claim(self, operator) -> bool:
        if self._operator is not None:
            return False
        self._operator = operator
        return True

    def _release(self, operator) -> None:
        if self._operator is operator:
            self._operator = None

    async def _reject_busy(self, operator) -> None:
        await operator.send(encode(ErrorMsg(code="busy", detail="another operator is connected")))

    async def _on_frame(self, frame: str, operator) -> None:
        try:
            result = decode(frame, side="client")
        except ProtocolError as e:
            # malformed input never kills the connection, let alone the server
            await operator.send(encode(ErrorMsg(code="parse", detail=str(e))))
            return
        self.session.queue.put(result.message)

    async def _handle_ws(self, websocket) -> None:
        operator = _WsOperator(websocket)
        if not self._claim(operator):
            await self._reject_busy(operator)
            return
        try:
            async for frame in websocket:
                if isinstance(frame, bytes):
                    frame = frame.decode("utf-8", errors="replace")
                await self._on_frame(frame, operator)
        finally:
            self._release(operator)

    async def _handle_tcp(self, reader, writer) -> None:
        operator = _TcpOperator(writer)
        if not self._claim(operator):
            await self._reject_busy(operator)
            writer.close()
            with contextlib.suppress(Exception):
                await writer.wait_closed()
            return
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                text = line.decode("utf-8", errors="replace").strip()
                if text:
                    await self._on_frame(text, operator)
        finally:
            self._release(operator)
            writer.close()
            with contextlib.suppress(Exception):
                await writer.wait_closed()

    # -- periodic tasks -----------------------------------------------------------

    async def _send_to_operator(self, msg) -> None:
        operator = self._operator
        if operator is None:
            return
        with contextlib.suppress(Exception):
            await operator.send(encode(msg))

    async def _sim_loop(self) -> None:
        dt = self.cfg.scene.dt
        steps_per_tick = max(1, int(round(self.wall_tick / dt)))
        loop = asyncio.get_running_loop()
        next_t = loop.time()
        while True:
            for reply in self.session.drain_and_apply():
                await self._send_to_operator(reply)
            for _ in range(steps_per_tick):
                self.session.tick()
            next_t += self.wall_tick
            await asyncio.sleep(max(0.0, next_t - loop.time()))

    async def _telemetry_loop(self) -> None:
        period = 1.0 / self.rate
        last_bars = None
        last_haptic = None
        while True:
            if self._operator is not None:
                await self._send_to_operator(self.session.telemetry())
                bars = self.session.bars()
                if last_bars is None or abs(bars.kt_frac - last_bars.kt_frac) > 1e-3 or abs(
                    bars.kr_frac - last_bars.kr_frac
                ) > 1e-3:
                    await self._send_to_operator(bars)
                    last_bars = bars
                haptic = self.session.haptic()
                if last_haptic is None or abs(haptic.amplitude - last_haptic.amplitude) > 1e-3:
                    await self._send_to_operator(haptic)
                    last_haptic = haptic
            await asyncio.sleep(period)


def serve(cfg: SessionConfig, host: str, ws_port: int, tcp_port: int | None, rate: float, log_dir: str) -> None:
    """Blocking entry point for the CLI; Ctrl-C stops the server."""
    server = GatewayServer(cfg, host=host, ws_port=ws_port, tcp_port=tcp_port, rate=rate, log_dir=log_dir)

    async def _main():
        await server.start()
        print(f"listening ws://{server.host}:{server.ws_port}" + (f" tcp:{server.tcp_port}" if server.tcp_port else ""), flush=True)
        try:
            await asyncio.Future()
        finally:
            await server.stop()

    try:
        asyncio.run(_main())
    except KeyboardInterrupt:
        pass
