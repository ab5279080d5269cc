import asyncio
import json
import time

from websockets.asyncio.client import connect

from teleimp.gateway import GatewayServer
from teleimp.protocol import decode
from teleimp.session import SessionConfig


def run(coro):
    return asyncio.run(asyncio.wait_for(coro, timeout=30.0))


async def start_server(**kwargs) -> GatewayServer:
    cfg = kwargs.pop("cfg", SessionConfig())
    server = GatewayServer(cfg, ws_port=0, tcp_port=0, **kwargs)
    await server.start()
    return server


async def recv_until(ws, msg_type: str, limit: int = 200):
    for _ in range(limit):
        frame = await asyncio.wait_for(ws.recv(), timeout=5.0)
        msg = decode(frame, side="server").message
        if msg.type == msg_type:
            return msg
    raise AssertionError(f"no {msg_type} within {limit} frames")


def test_ws_telemetry_flows_and_scale_applies():
    async def main():
        server = await start_server(rate=50.0)
        try:
            async with connect(f"ws://127.0.0.1:{server.ws_port}") as ws:
                telem = await recv_until(ws, "telemetry")
                assert telem.phase == "reach"
                await ws.send('{"type":"scale_set","s":0.5}')
                for _ in range(40):
                    await asyncio.sleep(0.01)
                    if server.session.pipeline.scale.s == 0.5:
                        break
                assert server.session.pipeline.scale.s == 0.5
        finally:
            await server.stop()

    run(main())


def test_ws_malformed_frame_gets_error_and_keeps_session():
    async def main():
        server = await start_server(rate=50.0)
        try:
            async with connect(f"ws://127.0.0.1:{server.ws_port}") as ws:
                await ws.send('{"type":"warp_drive"}')
                err = await recv_until(ws, "error")
                assert err.code == "parse"
                await ws.send("not json at all {{{")
                err = await recv_until(ws, "error")
                assert err.code == "parse"
                # still alive: a valid message applies
                await ws.send('{"type":"fsr","t":0.0,"pt":0.7,"pr":0.3}')
                for _ in range(40):
                    await asyncio.sleep(0.01)
                    if server.session.pressure.translational == 0.7:
                        break
                assert server.session.pressure.translational == 0.7
        finally:
            await server.stop()

    run(main())


def test_second_operator_rejected_busy():
    async def main():
        server = await start_server(rate=50.0)
        try:
            async with connect(f"ws://127.0.0.1:{server.ws_port}") as first:
                await recv_until(first, "telemetry")
                async with connect(f"ws://127.0.0.1:{server.ws_port}") as second:
                    frame = await asyncio.wait_for(second.recv(), timeout=5.0)
                    msg = decode(frame, side="server").message
                    assert msg.type == "error" and msg.code == "busy"
            # after the first leaves, the slot frees up
            await asyncio.sleep(0.05)
            async with connect(f"ws://127.0.0.1:{server.ws_port}") as third:
                await recv_until(third, "telemetry")
        finally:
            await server.stop()

    run(main())


def test_tcp_ndjson_transport():
    async def main():
        server = await start_server(rate=50.0)
        try:
            reader, writer = await asyncio.open_connection("127.0.0.1", server.tcp_port)
            writer.write(b'{"type":"fsr","t":0.0,"pt":0.9,"pr":0.1}\n')
            await writer.drain()
            line = await asyncio.wait_for(reader.readline(), timeout=5.0)
            msg = decode(line.decode(), side="server").message
            assert msg.type in ("telemetry", "bars", "haptic")
            for _ in range(40):
                await asyncio.sleep(0.01)
                if server.session.pressure.translational == 0.9:
                    break
            assert server.session.pressure.translational == 0.9
            writer.close()
            await writer.wait_closed()
        finally:
            await server.stop()

    run(main())


def test_telemetry_freshness():
    """Arrival gaps stay within two publication periods at the nominal rate."""
    async def main():
        server = await start_server(rate=20.0)
        period = 1.0 / 20.0
        try:
            async with connect(f"ws://127.0.0.1:{server.ws_port}") as ws:
                stamps = []
                while len(stamps) < 12:
                    frame = await asyncio.wait_for(ws.recv(), timeout=5.0)
                    if decode(frame, side="server").message.type == "telemetry":
                        stamps.append(time.monotonic())
                gaps = [b - a for a, b in zip(stamps, stamps[1:])]
                gaps = gaps[1:]  # first gap absorbs connection setup
                assert sorted(gaps)[len(gaps) // 2] <= 2.0 * period
                assert max(gaps) <= 2.0 * period + 0.05
        finally:
            await server.stop()

    run(main())


def test_bars_and_haptic_published_on_change():
    async def main():
        server = await start_server(rate=50.0)
        try:
            async with connect(f"ws://127.0.0.1:{server.ws_port}") as ws:
                await ws.send('{"type":"fsr","t":0.0,"pt":1.0,"pr":1.0}')
                bars = await recv_until(ws, "bars")
                assert bars.kt_frac >= 0.0
                last = bars
                for _ in range(100):
                    frame = await asyncio.wait_for(ws.recv(), timeout=5.0)
                    msg = decode(frame, side="server").message
                    if msg.type == "bars":
                        last = msg
                        if last.kt_frac > 0.9:
                            break
                assert last.kt_frac > 0.9  # slew ramp reflected in the bars stream
        finally:
            await server.stop()

    run(main())


def test_episode_logs_per_engagement(tmp_path):
    async def main():
        server = await start_server(rate=50.0, log_dir=str(tmp_path))
        try:
            async with connect(f"ws://127.0.0.1:{server.ws_port}") as ws:
                await ws.send('{"type":"pose_sample","t":0.0,"p":[0.0,0.0,0.2],"q":[1,0,0,0]}')
                await asyncio.sleep(0.05)
                await ws.send('{"type":"teleop_toggle"}')
                await asyncio.sleep(0.3)
                await ws.send('{"type":"teleop_toggle"}')
                await asyncio.sleep(0.1)
            assert len(server.session.episode_paths) == 1
            from teleimp.episodes import read_episode

            header, records = read_episode(server.session.episode_paths[0])
            assert records, "engagement produced no records"
        finally:
            await server.stop()

    run(main())
