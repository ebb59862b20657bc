import asyncio
import json
import socket

import websockets

from claypath.streamd.printer import VirtualPrinter
from claypath.streamd.service import StreamService


def cpl_program(n_layers=3, moves_per_layer=8):
    lines = []
    x = 0.0
    for k in range(n_layers):
        lines.append("EXT ON 2.000000")
        for _ in range(moves_per_layer):
            x += 10.0
            lines.append(f"MOVE {x:.6f} 0.000000 {5.0 * (k + 1):.6f} 30.000000 E")
        lines.append("EXT OFF")
    return "\n".join(lines) + "\n"


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


async def start_stack(program, delay_s=0.0, window=5, autostart=True):
    printer = await VirtualPrinter(delay_s=delay_s).start()
    svc = StreamService(program, window=window, autostart=autostart)
    ws_port = free_port()
    task = asyncio.create_task(
        svc.run("127.0.0.1", printer.port, "127.0.0.1", ws_port)
    )
    # wait for the websocket listener to come up
    for _ in range(100):
        try:
            ws = await websockets.connect(f"ws://127.0.0.1:{ws_port}")
            break
        except OSError:
            await asyncio.sleep(0.05)
    else:
        raise RuntimeError("service did not start")
    return printer, svc, task, ws, ws_port


async def teardown(printer, task, *sockets):
    for ws in sockets:
        await ws.close()
    task.cancel()
    try:
        await task
    except (asyncio.CancelledError, Exception):
        pass
    await printer.stop()


def test_full_print_run_delivers_every_line():
    async def main():
        program = cpl_program()
        printer, svc, task, ws, _ = await start_stack(program, delay_s=0.005, window=4)
        received = []

        async def collect():
            try:
                async for raw in ws:
                    received.append(json.loads(raw))
            except websockets.ConnectionClosed:
                pass

        collector = asyncio.create_task(collect())
        await asyncio.wait_for(svc._done.wait(), timeout=30)
        await asyncio.sleep(0.1)
        collector.cancel()

        # every program line reached the endpoint, in order, exactly once
        expected = [ln for ln in program.splitlines() if ln.strip()]
        assert printer.program_lines == expected
        assert svc.session.phase == "done"
        # the injected pump-off rode along as an idx -1 command
        assert printer.received_lines[-1] == "EXT OFF"
        # operator saw monotonically non-decreasing progress
        progress = [m["progress"] for m in received if m["t"] == "STATUS"]
        assert progress == sorted(progress)
        await teardown(printer, task, ws)

    asyncio.run(main())


def test_operator_snapshot_and_reconnect():
    async def main():
        printer, svc, task, ws, ws_port = await start_stack(
            cpl_program(), delay_s=0.05, window=2
        )
        first = json.loads(await asyncio.wait_for(ws.recv(), timeout=5))
        assert first["t"] == "STATUS"
        await ws.close()
        ws2 = await websockets.connect(f"ws://127.0.0.1:{ws_port}")
        again = json.loads(await asyncio.wait_for(ws2.recv(), timeout=5))
        assert again["t"] == "STATUS"
        assert again["seq"] > first["seq"]
        await teardown(printer, task, ws2)

    asyncio.run(main())


def test_operator_controls_start_and_flow():
    async def main():
        printer, svc, task, ws, _ = await start_stack(
            cpl_program(1, 3), delay_s=0.0, window=10, autostart=False
        )
        await asyncio.sleep(0.1)
        assert svc.session.phase == "loaded"
        await ws.send(json.dumps({"t": "SET_FLOW", "mult": 1.5}))
        await ws.send(json.dumps({"t": "START"}))
        await asyncio.wait_for(svc._done.wait(), timeout=30)
        assert printer.program_lines[0] == "EXT ON 3.000000"
        await teardown(printer, task, ws)

    asyncio.run(main())
