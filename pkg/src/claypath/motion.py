"""Motion compilation: toolpath -> synchronized robot/extruder program.

The compiler inserts EXT ON/OFF around every extrusion run, bridges gaps
with z-hop travel moves (wet clay must not be dragged through), splits
long edges into bounded sub-steps and merges collinear ones.  Programs
serialize to CPL, a line-oriented dialect:

    MOVE <x> <y> <z> <speed> <E|T>
    EXT ON <flow>
    EXT OFF
    DWELL <seconds>
    ; comment

All numbers are fixed 6-decimal notation.  The robot's implicit start
position is the origin.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .toolpath import EXTRUDE, Toolpath

ORIGIN = (0.0, 0.0, 0.0)
COLLINEAR_ANGLE_DEG = 0.1
COLLINEAR_DEVIATION_MM = 1e-6


class MotionError(ValueError):
    pass


class CplParseError(MotionError):
    pass


@dataclass
class Move:
    target: tuple[float, float, float]
    speed: float
    extruding: bool
    layer: int | None = field(default=None, compare=False)


@dataclass
class ExtOn:
    flow: float


@dataclass
class ExtOff:
    pass


@dataclass
class Dwell:
    seconds: float
    layer: int | None = field(default=None, compare=False)


Command = Move | ExtOn | ExtOff | Dwell


@dataclass
class MotionProgram:
    commands: list[Command] = field(default_factory=list)
    metadata: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        extruder_on = False
        pos = ORIGIN
        for i, cmd in enumerate(self.commands):
            if isinstance(cmd, Move):
                if cmd.speed <= 0:
                    raise MotionError(f"command {i}: non-positive speed")
                if math.dist(pos, cmd.target) == 0.0:
                    raise MotionError(f"command {i}: zero-length MOVE")
                if cmd.extruding and not extruder_on:
                    raise MotionError(f"command {i}: extruding MOVE before EXT ON")
                pos = cmd.target
            elif isinstance(cmd, ExtOn):
                if cmd.flow <= 0:
                    raise MotionError(f"command {i}: non-positive flow")
                extruder_on = True
            elif isinstance(cmd, ExtOff):
                extruder_on = False
            elif isinstance(cmd, Dwell):
                if cmd.seconds < 0:
                    raise MotionError(f"command {i}: negative dwell")


@dataclass
class CompileParams:
    extrude_speed: float
    travel_speed: float
    flow: float
    max_segment: float
    ext_lead_dwell: float = 0.5
    travel_hop: float = 2.0

    def validate(self):
        if min(self.extrude_speed, self.travel_speed, self.flow, self.max_segment) <= 0:
            raise MotionError("speeds, flow and max_segment must be positive")


@dataclass
class ProgramStats:
    move_count: int = 0
    total_length: float = 0.0
    extrude_length: float = 0.0
    travel_length: float = 0.0
    duration: float = 0.0
    mean_segment: float = 0.0
    mean_speed: float = 0.0
    per_layer_durations: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "move_count": self.move_count,
            "total_length_mm": self.total_length,
            "extrude_length_mm": self.extrude_length,
            "travel_length_mm": self.travel_length,
            "duration_s": self.duration,
            "mean_segment_mm": self.mean_segment,
            "mean_speed_mm_s": self.mean_speed,
            "per_layer_durations_s": {str(k): v for k, v in self.per_layer_durations.items()},
        }


def _merge_collinear(points):
    """Drop interior vertices that lie on the chord of their neighbours.

    A vertex goes only when the turn is below 0.1 degrees AND it sits
    within 1e-6 mm of the straight line, so the extruded geometry is
    preserved at micrometre scale.
    """
    if len(points) <= 2:
        return list(points)
    merged = [points[0]]
    i = 1
    while i < len(points) - 1:
        a = merged[-1]
        b = points[i]
        c = points[i + 1]
        if _mergeable(a, b, c):
            i += 1
            continue
        merged.append(b)
        i += 1
    merged.append(points[-1])
    return merged


def _mergeable(a, b, c) -> bool:
    ab = tuple(b[k] - a[k] for k in range(3))
    bc = tuple(c[k] - b[k] for k in range(3))
    lab = math.sqrt(sum(x * x for x in ab))
    lbc = math.sqrt(sum(x * x for x in bc))
    if lab == 0 or lbc == 0:
        return True
    cosang = sum(x * y for x, y in zip(ab, bc)) / (lab * lbc)
    cosang = max(-1.0, min(1.0, cosang))
    if math.degrees(math.acos(cosang)) >= COLLINEAR_ANGLE_DEG:
        return False
    # perpendicular distance of b from chord a-c
    ac = tuple(c[k] - a[k] for k in range(3))
    lac = math.sqrt(sum(x * x for x in ac))
    if lac == 0:
        return True
    cross = (
        ab[1] * ac[2] - ab[2] * ac[1],
        ab[2] * ac[0] - ab[0] * ac[2],
        ab[0] * ac[1] - ab[1] * ac[0],
    )
    dev = math.sqrt(sum(x * x for x in cross)) / lac
    return dev < COLLINEAR_DEVIATION_MM


def _split_edge(a, b, max_segment):
    length = math.dist(a, b)
    n = max(1, math.ceil(length / max_segment - 1e-12))
    return [
        tuple(a[k] + (b[k] - a[k]) * (i / n) for k in range(3)) for i in range(1, n + 1)
    ]


def compile(toolpath: Toolpath, params: CompileParams) -> MotionProgram:
    params.validate()
    toolpath.validate()
    if not toolpath.segments:
        raise MotionError("empty toolpath")
    commands: list[Command] = []
    pos = ORIGIN

    def emit_move(target, speed, extruding, layer):
        nonlocal pos
        if math.dist(pos, target) < 1e-12:
            return
        commands.append(Move(target=target, speed=speed, extruding=extruding, layer=layer))
        pos = target

    def travel_to(target, layer):
        if math.dist(pos, target) < 1e-12:
            return
        hop = params.travel_hop
        if hop > 0:
            lift = max(pos[2], target[2]) + hop
            emit_move((pos[0], pos[1], lift), params.travel_speed, False, layer)
            emit_move((target[0], target[1], lift), params.travel_speed, False, layer)
        emit_move(target, params.travel_speed, False, layer)

    for seg in toolpath.segments:
        if seg.kind == EXTRUDE:
            pts = _merge_collinear(seg.points)
            travel_to(pts[0], seg.layer_index)
            commands.append(ExtOn(flow=params.flow))
            if params.ext_lead_dwell > 0:
                commands.append(Dwell(seconds=params.ext_lead_dwell, layer=seg.layer_index))
            for a, b in zip(pts, pts[1:]):
                for sub in _split_edge(a, b, params.max_segment):
                    emit_move(sub, params.extrude_speed, True, seg.layer_index)
            commands.append(ExtOff())
        else:
            for p in seg.points:
                emit_move(p, params.travel_speed, False, seg.layer_index)

    program = MotionProgram(
        commands=commands,
        metadata={
            "source_toolpath_sha256": hashlib.sha256(
                toolpath.to_json().encode()
            ).hexdigest(),
            "params": vars(params).copy(),
        },
    )
    program.validate()
    return program


def program_stats(program: MotionProgram) -> ProgramStats:
    stats = ProgramStats()
    pos = ORIGIN
    for cmd in program.commands:
        if isinstance(cmd, Move):
            length = math.dist(pos, cmd.target)
            dt = length / cmd.speed
            stats.move_count += 1
            stats.total_length += length
            if cmd.extruding:
                stats.extrude_length += length
            else:
                stats.travel_length += length
            stats.duration += dt
            if cmd.layer is not None:
                stats.per_layer_durations[cmd.layer] = (
                    stats.per_layer_durations.get(cmd.layer, 0.0) + dt
                )
            pos = cmd.target
        elif isinstance(cmd, Dwell):
            stats.duration += cmd.seconds
            if cmd.layer is not None:
                stats.per_layer_durations[cmd.layer] = (
                    stats.per_layer_durations.get(cmd.layer, 0.0) + cmd.seconds
                )
    if stats.move_count:
        stats.mean_segment = stats.total_length / stats.move_count
    if stats.duration > 0:
        stats.mean_speed = stats.total_length / stats.duration
    return stats


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def emit_cpl(program: MotionProgram) -> str:
    lines = []
    for cmd in program.commands:
        if isinstance(cmd, Move):
            x, y, z = cmd.target
            flag = "E" if cmd.extruding else "T"
            lines.append(f"MOVE {_fmt(x)} {_fmt(y)} {_fmt(z)} {_fmt(cmd.speed)} {flag}")
        elif isinstance(cmd, ExtOn):
            lines.append(f"EXT ON {_fmt(cmd.flow)}")
        elif isinstance(cmd, ExtOff):
            lines.append("EXT OFF")
        elif isinstance(cmd, Dwell):
            lines.append(f"DWELL {_fmt(cmd.seconds)}")
    return "\n".join(lines) + "\n"


def parse_cpl(text: str) -> MotionProgram:
    if not text.strip():
        raise CplParseError("empty program text")
    commands: list[Command] = []
    extruder_on = False
    pos = ORIGIN
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op = parts[0]
        if op == "MOVE":
            if len(parts) != 6:
                raise CplParseError(f"arity mismatch at line {lineno}")
            try:
                x, y, z, speed = (float(v) for v in parts[1:5])
            except ValueError:
                raise CplParseError(f"non-numeric field at line {lineno}")
            if parts[5] not in ("E", "T"):
                raise CplParseError(f"bad extrusion flag at line {lineno}")
            if speed <= 0:
                raise CplParseError(f"non-positive speed at line {lineno}")
            extruding = parts[5] == "E"
            if extruding and not extruder_on:
                raise CplParseError(f"extruding before EXT ON at line {lineno}")
            if (x, y, z) == pos:
                raise CplParseError(f"zero-length MOVE at line {lineno}")
            commands.append(Move(target=(x, y, z), speed=speed, extruding=extruding))
            pos = (x, y, z)
        elif op == "EXT":
            if len(parts) == 3 and parts[1] == "ON":
                try:
                    flow = float(parts[2])
                except ValueError:
                    raise CplParseError(f"non-numeric field at line {lineno}")
                if flow <= 0:
                    raise CplParseError(f"non-positive flow at line {lineno}")
                commands.append(ExtOn(flow=flow))
                extruder_on = True
            elif len(parts) == 2 and parts[1] == "OFF":
                commands.append(ExtOff())
                extruder_on = False
            else:
                raise CplParseError(f"arity mismatch at line {lineno}")
        elif op == "DWELL":
            if len(parts) != 2:
                raise CplParseError(f"arity mismatch at line {lineno}")
            try:
                seconds = float(parts[1])
            except ValueError:
                raise CplParseError(f"non-numeric field at line {lineno}")
            if seconds < 0:
                raise CplParseError(f"negative dwell at line {lineno}")
            commands.append(Dwell(seconds=seconds))
        else:
            raise CplParseError(f"unknown opcode {op!r} at line {lineno}")
    return MotionProgram(commands=commands)
