"""Virtual printer endpoint: a TCP server speaking the CMD/ACK protocol.

Receives newline-delimited JSON CMD messages, records the CPL lines it
was given and acknowledges the highest contiguous program index.  Useful
as a stand-in robot bridge for integration tests and dry runs.
"""

from __future__ import annotations

import asyncio
import json
import logging

log = logging.getLogger(__name__)


class VirtualPrinter:
    def __init__(self, host: str = "127.0.0.1", port: int = 0, delay_s: float = 0.0):
        self.host = host
        self.port = port
        self.delay_s = delay_s
        self.received_lines: list[str] = []
        self.program_lines: list[str] = []  # idx >= 0 lines, in execution order
        self._server: asyncio.AbstractServer | None = None

    async def start(self):
        self._server = await asyncio.start_server(self._on_connect, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        return self

    async def stop(self):
        if self._server:
            self._server.close()
            await self._server.wait_closed()

    async def _on_connect(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        seq = 0
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    log.warning("virtual printer: bad json %r", raw)
                    continue
                if msg.get("t") != "CMD":
                    continue
                if self.delay_s:
                    await asyncio.sleep(self.delay_s)
                line = msg.get("line", "")
                idx = msg.get("idx", -1)
                self.received_lines.append(line)
                if idx >= 0:
                    self.program_lines.append(line)
                    seq += 1
                    ack = {"t": "ACK", "seq": seq, "idx": idx}
                    writer.write((json.dumps(ack) + "\n").encode())
                    await writer.drain()
        except ConnectionResetError:
            pass
        finally:
            writer.close()


async def run_printer(host: str, port: int, delay_s: float = 0.0):
    printer = VirtualPrinter(host, port, delay_s)
    await printer.start()
    log.info("virtual printer listening on %s:%d", printer.host, printer.port)
    await asyncio.Event().wait()
