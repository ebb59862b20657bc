"""Single-authority print session state machine.

All mutations flow through Session.handle(); transports deliver inputs
and carry effects back out, nothing more.  That keeps the windowed
streaming protocol fully testable without sockets.

Phases: idle -> loaded -> printing <-> paused -> stopping -> done, any
-> faulted.  Program commands are streamed as CMD messages with a
monotonically increasing idx; the endpoint acks the highest contiguous
executed idx.  At most `window` commands are unacknowledged in flight.
Pump-safety commands injected by the session itself (EXT OFF on
pause/stop/done, EXT ON on resume) travel as CMD with idx == -1 and
take no part in window accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..motion import Move, ExtOn, ExtOff, parse_cpl

IDLE = "idle"
LOADED = "loaded"
PRINTING = "printing"
PAUSED = "paused"
STOPPING = "stopping"
DONE = "done"
FAULTED = "faulted"

DEFAULT_WINDOW = 100
ETA_SPEED_WINDOW_S = 60.0


class SessionError(ValueError):
    pass


@dataclass
class Control:
    msg: dict


@dataclass
class Ack:
    idx: int


@dataclass
class Tick:
    now: float


@dataclass
class EndpointEvent:
    msg: dict


@dataclass
class Effect:
    target: str  # "endpoint" | "operator"
    msg: dict


def _scaled_ext_on_line(line: str, mult: float) -> str:
    parts = line.split()
    flow = float(parts[2]) * mult
    return f"EXT ON {flow:.6f}"


class Session:
    def __init__(self, session_id: str = "s0", window: int = DEFAULT_WINDOW):
        self.session_id = session_id
        self.window = window
        self.phase = IDLE
        self.program_lines: list[str] = []
        self.cursor = 0  # next idx to dispatch
        self.acked = -1  # highest contiguous acknowledged idx
        self.flow_override = 1.0
        self.stop_after_drain = False
        self.pause_off_pending = False
        self.defect_count = 0
        self.out_seq = 0
        self.started_at: float | None = None
        self.now = 0.0
        # cumulative path length up to each command idx, for progress/eta
        self._cumlen: list[float] = []
        self._speed_samples: list[tuple[float, float]] = []  # (time, delivered length)

    # -- message helpers ------------------------------------------------

    def _msg(self, t: str, **fields) -> dict:
        self.out_seq += 1
        return {"t": t, "seq": self.out_seq, "session": self.session_id, **fields}

    def _error(self, reason: str) -> Effect:
        return Effect("operator", self._msg("ERROR", reason=reason))

    # -- program bookkeeping --------------------------------------------

    def _load_program(self, text: str):
        program = parse_cpl(text)  # raises on malformed programs
        self.program_lines = [ln for ln in text.splitlines() if ln.split(";", 1)[0].strip()]
        cum = [0.0]
        pos = (0.0, 0.0, 0.0)
        for cmd in program.commands:
            if isinstance(cmd, Move):
                cum.append(cum[-1] + math.dist(pos, cmd.target))
                pos = cmd.target
            else:
                cum.append(cum[-1])
        self._cumlen = cum
        self._program = program

    def _extruder_on_at(self, idx: int) -> bool:
        on = False
        for cmd in self._program.commands[:idx]:
            if isinstance(cmd, ExtOn):
                on = True
            elif isinstance(cmd, ExtOff):
                on = False
        return on

    @property
    def in_flight(self) -> int:
        return self.cursor - (self.acked + 1)

    @property
    def progress(self) -> float:
        n = len(self.program_lines)
        return (self.acked + 1) / n if n else 0.0

    def telemetry(self) -> dict:
        elapsed = (self.now - self.started_at) if self.started_at is not None else 0.0
        total = self._cumlen[-1] if self._cumlen else 0.0
        done_len = self._cumlen[self.acked + 1] if self._cumlen and self.acked >= 0 else 0.0
        recent = [s for s in self._speed_samples if s[0] >= self.now - ETA_SPEED_WINDOW_S]
        eta = None
        if len(recent) >= 2:
            dt = recent[-1][0] - recent[0][0]
            dl = recent[-1][1] - recent[0][1]
            if dt > 0 and dl > 0:
                eta = (total - done_len) / (dl / dt)
        layer = sum(
            1
            for cmd in self._program.commands[: self.acked + 1]
            if isinstance(cmd, ExtOff)
        ) if self.program_lines else 0
        return {
            "progress": self.progress,
            "layer": layer,
            "elapsed": elapsed,
            "eta": eta,
            "defects": self.defect_count,
            "phase": self.phase,
        }

    def status_effect(self) -> Effect:
        return Effect("operator", self._msg("STATUS", **self.telemetry()))

    # -- core transition function ---------------------------------------

    def handle(self, inp) -> list[Effect]:
        if isinstance(inp, Control):
            return self._handle_control(inp.msg)
        if isinstance(inp, Ack):
            return self._handle_ack(inp.idx)
        if isinstance(inp, Tick):
            self.now = inp.now
            if self.phase == PRINTING:
                return [self.status_effect()]
            return []
        if isinstance(inp, EndpointEvent):
            return self._handle_endpoint_event(inp.msg)
        raise SessionError(f"unknown input {inp!r}")

    def _handle_control(self, msg: dict) -> list[Effect]:
        t = msg.get("t")
        if t == "LOAD":
            if self.phase not in (IDLE, LOADED, DONE):
                return [self._error(f"illegal transition: LOAD while {self.phase}")]
            try:
                self._load_program(msg["program"])
            except Exception as e:
                return [self._error(f"bad program: {e}")]
            self.cursor = 0
            self.acked = -1
            self.stop_after_drain = False
            self.pause_off_pending = False
            self.phase = LOADED
            return [self.status_effect()]
        if t == "START":
            if self.phase != LOADED:
                return [self._error(f"illegal transition: START while {self.phase}")]
            self.phase = PRINTING
            self.started_at = self.now
            self._speed_samples = [(self.now, 0.0)]
            return self._dispatch() + [self.status_effect()]
        if t == "PAUSE":
            if self.phase != PRINTING:
                return [self._error(f"illegal transition: PAUSE while {self.phase}")]
            self.phase = PAUSED
            effects = [self.status_effect()]
            if self.in_flight == 0:
                effects.append(self._pump_off())
            else:
                self.pause_off_pending = True
            return effects
        if t == "RESUME":
            if self.phase != PAUSED:
                return [self._error(f"illegal transition: RESUME while {self.phase}")]
            self.phase = PRINTING
            self.pause_off_pending = False
            effects = []
            if self._extruder_on_at(self.cursor):
                effects.append(self._pump_on())
            effects.extend(self._dispatch())
            effects.append(self.status_effect())
            return effects
        if t == "STOP":
            if self.phase not in (PRINTING, PAUSED):
                return [self._error(f"illegal transition: STOP while {self.phase}")]
            effects = []
            if self.in_flight == 0:
                effects.append(self._pump_off())
                self.phase = DONE
                effects.append(Effect("operator", self._msg("DONE")))
            else:
                self.phase = STOPPING
                self.stop_after_drain = True
            effects.append(self.status_effect())
            return effects
        if t == "SET_FLOW":
            mult = msg.get("mult")
            if not isinstance(mult, (int, float)) or not (0 < mult <= 2):
                return [self._error("SET_FLOW multiplier must be in (0, 2]")]
            self.flow_override = float(mult)
            return [self.status_effect()]
        return [self._error(f"unknown control {t!r}")]

    def _handle_ack(self, idx: int) -> list[Effect]:
        if idx < self.acked or idx >= self.cursor:
            return [self._error(f"bad ack idx {idx}")]
        self.acked = idx
        self._speed_samples.append((self.now, self._cumlen[self.acked + 1]))
        effects: list[Effect] = []
        if self.phase == PRINTING:
            effects.extend(self._dispatch())
            if self.acked == len(self.program_lines) - 1:
                effects.append(self._pump_off())
                self.phase = DONE
                effects.append(Effect("operator", self._msg("DONE")))
        elif self.phase == PAUSED and self.pause_off_pending and self.in_flight == 0:
            self.pause_off_pending = False
            effects.append(self._pump_off())
        elif self.phase == STOPPING and self.in_flight == 0:
            effects.append(self._pump_off())
            self.phase = DONE
            effects.append(Effect("operator", self._msg("DONE")))
        return effects

    def _handle_endpoint_event(self, msg: dict) -> list[Effect]:
        t = msg.get("t")
        if t == "DEFECT":
            self.defect_count += 1
            return [Effect("operator", self._msg("DEFECT", entry=msg.get("entry", {})))]
        if t == "ERROR":
            self.phase = FAULTED
            return [self._error(f"endpoint error: {msg.get('reason')}")]
        return []

    def fault(self, reason: str) -> list[Effect]:
        self.phase = FAULTED
        return [self._error(reason)]

    # -- dispatch & pump safety -----------------------------------------

    def _dispatch(self) -> list[Effect]:
        effects = []
        while (
            self.phase == PRINTING
            and self.cursor < len(self.program_lines)
            and self.in_flight < self.window
        ):
            line = self.program_lines[self.cursor]
            stripped = line.split(";", 1)[0].strip()
            if stripped.startswith("EXT ON") and self.flow_override != 1.0:
                stripped = _scaled_ext_on_line(stripped, self.flow_override)
            effects.append(
                Effect("endpoint", self._msg("CMD", idx=self.cursor, line=stripped))
            )
            self.cursor += 1
        return effects

    def _pump_off(self) -> Effect:
        return Effect("endpoint", self._msg("CMD", idx=-1, line="EXT OFF"))

    def _pump_on(self) -> Effect:
        # re-arm the extruder at the flow active at the cursor position
        flow = 2.0
        for cmd in self._program.commands[: self.cursor]:
            if isinstance(cmd, ExtOn):
                flow = cmd.flow
        flow *= self.flow_override
        return Effect("endpoint", self._msg("CMD", idx=-1, line=f"EXT ON {flow:.6f}"))
