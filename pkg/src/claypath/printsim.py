"""Virtual printer: executes a motion program under a pump model.

Flow is piecewise constant, so all deposition masses are closed-form
integrals over command intervals; there is no timestep error.  The
legacy (no stop-and-go) pump keeps dispensing through travels and
dwells, which shows up as excess deposits exactly like the overnight
blobs a real pump without flow switching produces.  Flow-disruption
faults scale flow inside given time windows and are logged as
under-extruded spans.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .motion import Dwell, ExtOff, ExtOn, MotionProgram, Move, ORIGIN

STOP_AND_GO = "stop_and_go"
LEGACY_CONTINUOUS = "legacy_continuous"


class SimError(ValueError):
    pass


@dataclass
class PumpModel:
    mode: str = STOP_AND_GO
    flow_g_s: float = 2.0
    start_latency_s: float = 0.0
    stop_latency_s: float = 0.0

    def validate(self):
        if self.mode not in (STOP_AND_GO, LEGACY_CONTINUOUS):
            raise SimError(f"unknown pump mode {self.mode!r}")
        if self.flow_g_s <= 0:
            raise SimError("flow must be positive")
        if self.start_latency_s < 0 or self.stop_latency_s < 0:
            raise SimError("latencies must be >= 0")


@dataclass
class Disruption:
    start_s: float
    end_s: float
    flow_multiplier: float

    def validate(self):
        if self.end_s <= self.start_s:
            raise SimError("disruption interval must have positive length")
        if not (0 <= self.flow_multiplier < 1):
            raise SimError("flow multiplier must be in [0, 1)")


@dataclass
class FaultSpec:
    flow_disruption: list[Disruption] = field(default_factory=list)
    seed: int = 0

    def validate(self):
        ordered = sorted(self.flow_disruption, key=lambda d: d.start_s)
        for d in ordered:
            d.validate()
        for a, b in zip(ordered, ordered[1:]):
            if b.start_s < a.end_s:
                raise SimError("disruption intervals overlap")

    def multiplier_at(self, t: float) -> float:
        for d in self.flow_disruption:
            if d.start_s <= t < d.end_s:
                return d.flow_multiplier
        return 1.0

    @classmethod
    def from_json(cls, text: str) -> "FaultSpec":
        doc = json.loads(text)
        spec = cls(
            flow_disruption=[
                Disruption(float(d["start_s"]), float(d["end_s"]), float(d["flow_multiplier"]))
                for d in doc.get("flow_disruption", [])
            ],
            seed=int(doc.get("seed", 0)),
        )
        spec.validate()
        return spec


@dataclass
class PrintReport:
    deposited: list[dict] = field(default_factory=list)
    excess_deposits: list[dict] = field(default_factory=list)
    underextruded_spans: list[dict] = field(default_factory=list)
    duration_s: float = 0.0
    completed: bool = True
    halt_reason: str | None = None
    deposited_g: float = 0.0
    excess_g: float = 0.0
    deficit_g: float = 0.0
    powered_time_s: float = 0.0

    @property
    def defect_count(self) -> int:
        return len(self.excess_deposits) + len(self.underextruded_spans)

    def to_json(self) -> str:
        return json.dumps(
            {
                "duration_s": self.duration_s,
                "completed": self.completed,
                "halt_reason": self.halt_reason,
                "deposited_g": self.deposited_g,
                "excess_g": self.excess_g,
                "deficit_g": self.deficit_g,
                "powered_time_s": self.powered_time_s,
                "defect_count": self.defect_count,
                "deposited": self.deposited,
                "excess_deposits": self.excess_deposits,
                "underextruded_spans": self.underextruded_spans,
            }
        )


@dataclass
class _Interval:
    t0: float
    t1: float
    kind: str  # move | dwell
    extruding: bool
    p0: tuple[float, float, float] = ORIGIN
    p1: tuple[float, float, float] = ORIGIN

    def pos_at(self, t: float):
        if self.kind != "move" or self.t1 == self.t0:
            return self.p0
        u = (t - self.t0) / (self.t1 - self.t0)
        return tuple(self.p0[k] + u * (self.p1[k] - self.p0[k]) for k in range(3))


def _timeline(program: MotionProgram, pump: PumpModel):
    """Expand commands into timed intervals plus pump powered windows."""
    intervals: list[_Interval] = []
    powered: list[list[float]] = []  # closed [on, off] windows
    flow_events: list[tuple[float, float]] = [(0.0, pump.flow_g_s)]
    t = 0.0
    pos = ORIGIN
    open_window: list | None = None
    for cmd in program.commands:
        if isinstance(cmd, Move):
            length = math.dist(pos, cmd.target)
            dt = length / cmd.speed
            intervals.append(
                _Interval(t, t + dt, "move", cmd.extruding, pos, cmd.target)
            )
            pos = cmd.target
            t += dt
        elif isinstance(cmd, Dwell):
            intervals.append(_Interval(t, t + cmd.seconds, "dwell", False, pos, pos))
            t += cmd.seconds
        elif isinstance(cmd, ExtOn):
            flow_events.append((t, cmd.flow))
            if open_window is None:
                open_window = [t + pump.start_latency_s, None]
        elif isinstance(cmd, ExtOff):
            if open_window is not None and pump.mode == STOP_AND_GO:
                open_window[1] = t + pump.stop_latency_s
                powered.append(open_window)
                open_window = None
    if open_window is not None:
        open_window[1] = t
        powered.append(open_window)
    return intervals, powered, flow_events, t


def simulate(
    program: MotionProgram,
    pump: PumpModel,
    faults: FaultSpec | None = None,
    until: float | None = None,
    halt_reason: str | None = None,
) -> PrintReport:
    pump.validate()
    faults = faults or FaultSpec()
    faults.validate()
    program.validate()
    intervals, powered, flow_events, duration = _timeline(program, pump)

    def flow_at(t: float) -> float:
        current = flow_events[0][1]
        for et, f in flow_events:
            if et <= t:
                current = f
            else:
                break
        return current
    if until is None:
        until = duration
    if until < 0 or until > duration + 1e-9:
        raise SimError("halt time outside program duration")

    report = PrintReport(duration_s=min(until, duration))
    report.completed = until >= duration
    if not report.completed:
        report.halt_reason = halt_reason or "operator stop"

    cuts = sorted(
        {until}
        | {b for w in powered for b in w}
        | {et for et, _ in flow_events}
        | {d.start_s for d in faults.flow_disruption}
        | {d.end_s for d in faults.flow_disruption}
    )

    def powered_at(t: float) -> bool:
        return any(w[0] <= t < w[1] for w in powered)

    last_under = None
    for iv in intervals:
        if iv.t0 >= until:
            break
        lo, hi = iv.t0, min(iv.t1, until)
        points = [lo] + [c for c in cuts if lo < c < hi] + [hi]
        for a, b in zip(points, points[1:]):
            dt = b - a
            if dt <= 0:
                continue
            mid = (a + b) / 2
            if not powered_at(mid):
                continue
            m = faults.multiplier_at(mid)
            flow = flow_at(mid)
            nominal = flow * dt
            actual = nominal * m
            report.powered_time_s += dt
            if iv.kind == "move" and iv.extruding:
                speed = math.dist(iv.p0, iv.p1) / (iv.t1 - iv.t0) if iv.t1 > iv.t0 else 0.0
                report.deposited.append(
                    {"t0": a, "t1": b, "grams": actual, "flow_g_s": flow * m}
                )
                report.deposited_g += actual
                if m < 1.0:
                    deficit = nominal - actual
                    if last_under is not None and abs(last_under["t1"] - a) < 1e-9:
                        last_under["t1"] = b
                        last_under["path_length_mm"] += speed * dt
                        last_under["deficit_g"] += deficit
                    else:
                        last_under = {
                            "t0": a,
                            "t1": b,
                            "path_length_mm": speed * dt,
                            "deficit_g": deficit,
                        }
                        report.underextruded_spans.append(last_under)
                    report.deficit_g += deficit
            else:
                # pump running while not extruding: excess at the nozzle
                report.excess_deposits.append(
                    {"location": list(iv.pos_at(mid)), "grams": actual}
                )
                report.excess_g += actual
                if m < 1.0:
                    report.deficit_g += nominal - actual
    return report


def halt(program: MotionProgram, pump: PumpModel, faults: FaultSpec | None, at_time_s: float) -> PrintReport:
    """Simulate up to at_time_s and stop, as if the operator hit halt."""
    return simulate(program, pump, faults, until=at_time_s, halt_reason="operator stop")
