"""Streaming control service.

Owns one Session and wires it to two transports: a TCP connection to the
printer endpoint (ndjson CMD out, ACK in) and a WebSocket listener for
operator consoles (ndjson-over-frames both ways).  All session mutations
happen on a single consumer task fed by an asyncio queue, so transports
stay dumb pipes.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time

import websockets

from .session import Ack, Control, EndpointEvent, Session, Tick

log = logging.getLogger(__name__)

STATUS_INTERVAL_S = 1.0


class StreamService:
    def __init__(self, program_text: str, window: int = 100, autostart: bool = False):
        self.session = Session(window=window)
        self.program_text = program_text
        self.autostart = autostart
        self.inputs: asyncio.Queue = asyncio.Queue()
        self.operators: set = set()
        self._endpoint_writer: asyncio.StreamWriter | None = None
        self._done = asyncio.Event()

    # -- effect routing --------------------------------------------------

    async def _apply(self, inp):
        try:
            effects = self.session.handle(inp)
        except Exception as e:
            log.exception("session error")
            effects = self.session.fault(f"internal error: {e}")
        for eff in effects:
            if eff.target == "endpoint":
                await self._send_endpoint(eff.msg)
            else:
                await self._broadcast(eff.msg)
            if eff.msg.get("t") == "DONE":
                self._done.set()

    async def _send_endpoint(self, msg: dict):
        if self._endpoint_writer is None:
            return
        try:
            self._endpoint_writer.write((json.dumps(msg) + "\n").encode())
            await self._endpoint_writer.drain()
        except ConnectionError:
            await self.inputs.put(EndpointEvent({"t": "ERROR", "reason": "endpoint disconnected"}))

    async def _broadcast(self, msg: dict):
        text = json.dumps(msg)
        dead = []
        for ws in self.operators:
            try:
                await ws.send(text)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.operators.discard(ws)

    # -- transport tasks -------------------------------------------------

    async def _consume(self):
        while True:
            inp = await self.inputs.get()
            await self._apply(inp)

    async def _tick(self):
        while True:
            await asyncio.sleep(STATUS_INTERVAL_S)
            await self.inputs.put(Tick(time.monotonic()))

    async def _read_endpoint(self, reader: asyncio.StreamReader):
        while True:
            raw = await reader.readline()
            if not raw:
                await self.inputs.put(
                    EndpointEvent({"t": "ERROR", "reason": "endpoint disconnected"})
                )
                return
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                continue
            if msg.get("t") == "ACK":
                await self.inputs.put(Ack(int(msg["idx"])))
            else:
                await self.inputs.put(EndpointEvent(msg))

    async def _operator_handler(self, ws):
        self.operators.add(ws)
        try:
            # late joiners get a status snapshot immediately
            await ws.send(json.dumps(self.session.status_effect().msg))
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    continue
                await self.inputs.put(Control(msg))
        except websockets.ConnectionClosed:
            pass
        finally:
            self.operators.discard(ws)

    # -- lifecycle -------------------------------------------------------

    async def run(self, endpoint_host: str, endpoint_port: int, listen_host: str, listen_port: int):
        reader, writer = await asyncio.open_connection(endpoint_host, endpoint_port)
        self._endpoint_writer = writer
        consumer = asyncio.create_task(self._consume())
        ticker = asyncio.create_task(self._tick())
        ep_reader = asyncio.create_task(self._read_endpoint(reader))
        async with websockets.serve(self._operator_handler, listen_host, listen_port):
            await self.inputs.put(Tick(time.monotonic()))
            await self.inputs.put(Control({"t": "LOAD", "seq": 0, "program": self.program_text}))
            if self.autostart:
                await self.inputs.put(Control({"t": "START", "seq": 1}))
            try:
                await asyncio.Event().wait()
            finally:
                for task in (consumer, ticker, ep_reader):
                    task.cancel()
                writer.close()


def serve(program_text: str, endpoint: str, listen: str, window: int = 100, autostart: bool = False):
    """Blocking entry point: endpoint/listen as host:port strings."""
    eh, ep = endpoint.rsplit(":", 1)
    lh, lp = listen.rsplit(":", 1)
    svc = StreamService(program_text, window=window, autostart=autostart)
    asyncio.run(svc.run(eh, int(ep), lh, int(lp)))
