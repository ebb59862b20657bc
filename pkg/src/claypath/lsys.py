"""Deterministic context-free L-systems with a 3D turtle interpreter.

Grammar scripts are line-oriented: `axiom <string>`, `rule <sym> -> <string>`,
`angle <deg>`, `step <mm>`, `#` comments.  Expansion rewrites every symbol
in parallel each generation; the turtle maps symbols to pen movements and
successive generations can be stacked vertically into a toolpath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .toolpath import EXTRUDE, TRAVEL, Segment, Toolpath

EXPANSION_CAP = 10_000_000
REORTHONORMALIZE_EVERY = 1000

DRAW_SYMBOLS = frozenset("FG")


class GrammarError(ValueError):
    pass


class TurtleError(ValueError):
    pass


@dataclass
class Grammar:
    axiom: str
    rules: dict[str, str] = field(default_factory=dict)
    angle_deg: float = 90.0
    step_mm: float = 10.0


def parse_grammar(text: str) -> Grammar:
    axiom = None
    rules: dict[str, str] = {}
    angle = 90.0
    step = 10.0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        directive = parts[0]
        rest = parts[1] if len(parts) > 1 else ""
        if directive == "axiom":
            if not rest:
                raise GrammarError(f"line {lineno}: empty axiom")
            axiom = rest.replace(" ", "")
        elif directive == "rule":
            if "->" not in rest:
                raise GrammarError(f"line {lineno}: rule needs '->'")
            lhs, rhs = (s.strip() for s in rest.split("->", 1))
            if len(lhs) != 1:
                raise GrammarError(f"line {lineno}: rule key must be a single symbol")
            if not rhs:
                raise GrammarError(f"line {lineno}: empty replacement for {lhs}")
            if lhs in rules:
                raise GrammarError(f"line {lineno}: duplicate rule {lhs}")
            rules[lhs] = rhs.replace(" ", "")
        elif directive == "angle":
            angle = float(rest)
        elif directive == "step":
            step = float(rest)
        else:
            raise GrammarError(f"line {lineno}: unknown directive {directive!r}")
    if axiom is None:
        raise GrammarError("missing axiom line")
    return Grammar(axiom=axiom, rules=rules, angle_deg=angle, step_mm=step)


def rewrite_once(grammar: Grammar, symbols: str) -> str:
    return "".join(grammar.rules.get(s, s) for s in symbols)


def expand(grammar: Grammar, generations: int, cap: int = EXPANSION_CAP) -> str:
    if generations < 0:
        raise GrammarError("generations must be >= 0")
    word = grammar.axiom
    for _ in range(generations):
        out = []
        size = 0
        for s in word:
            r = grammar.rules.get(s, s)
            size += len(r)
            if size > cap:
                raise GrammarError("expansion limit")
            out.append(r)
        word = "".join(out)
    return word


@dataclass
class TurtleConfig:
    start_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    heading: tuple[float, float, float] = (1.0, 0.0, 0.0)
    left: tuple[float, float, float] = (0.0, 1.0, 0.0)
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    angle_deg: float = 90.0
    step_mm: float = 10.0

    def validate(self):
        frame = np.array([self.heading, self.left, self.up], dtype=float)
        if not np.allclose(frame @ frame.T, np.eye(3), atol=1e-9):
            raise TurtleError("turtle frame must be orthonormal")

    @classmethod
    def for_grammar(cls, grammar: Grammar, **overrides) -> "TurtleConfig":
        return cls(angle_deg=grammar.angle_deg, step_mm=grammar.step_mm, **overrides)


def _rotate(v: np.ndarray, axis: np.ndarray, angle_rad: float) -> np.ndarray:
    # axis is renormalized so floating drift cannot compound multiplicatively
    axis = axis / np.linalg.norm(axis)
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return v * c + np.cross(axis, v) * s + axis * float(axis @ v) * (1.0 - c)


def turtle_path(symbols: str, config: TurtleConfig) -> list[list[tuple[float, float, float]]]:
    """Interpret a symbol string as pen movements; returns drawn polylines."""
    config.validate()
    pos = np.array(config.start_position, dtype=float)
    h = np.array(config.heading, dtype=float)
    l = np.array(config.left, dtype=float)
    u = np.array(config.up, dtype=float)
    angle = math.radians(config.angle_deg)
    stack: list[tuple] = []
    polylines: list[list[tuple[float, float, float]]] = []
    current: list[tuple[float, float, float]] = []
    rotations = 0

    def flush():
        nonlocal current
        if len(current) >= 2:
            polylines.append(current)
        current = []

    for sym in symbols:
        if sym in DRAW_SYMBOLS:
            if not current:
                current = [tuple(pos)]
            pos = pos + config.step_mm * h
            current.append(tuple(pos))
        elif sym == "f":
            flush()
            pos = pos + config.step_mm * h
        elif sym in "+-&^\\/":
            if sym == "+":
                h, l = _rotate(h, u, angle), _rotate(l, u, angle)
            elif sym == "-":
                h, l = _rotate(h, u, -angle), _rotate(l, u, -angle)
            elif sym == "&":
                h, u = _rotate(h, l, angle), _rotate(u, l, angle)
            elif sym == "^":
                h, u = _rotate(h, l, -angle), _rotate(u, l, -angle)
            elif sym == "\\":
                l, u = _rotate(l, h, angle), _rotate(u, h, angle)
            else:  # '/'
                l, u = _rotate(l, h, -angle), _rotate(u, h, -angle)
            rotations += 1
            if rotations % REORTHONORMALIZE_EVERY == 0:
                h, l, u = _reorthonormalize(h, l, u)
        elif sym == "[":
            stack.append((pos.copy(), h.copy(), l.copy(), u.copy()))
        elif sym == "]":
            if not stack:
                raise TurtleError("] with empty stack")
            flush()
            pos, h, l, u = stack.pop()
        # any other symbol is a no-op
    flush()
    return polylines


def _reorthonormalize(h, l, u):
    h = h / np.linalg.norm(h)
    l = l - (l @ h) * h
    l = l / np.linalg.norm(l)
    u = np.cross(h, l)
    return h, l, u


def stack_generations(
    grammar: Grammar,
    generations: list[int],
    config: TurtleConfig,
    z_step: float,
) -> Toolpath:
    """Interpret each listed generation as a layer, stacked at z_step increments."""
    if not generations:
        raise GrammarError("no generations listed")
    if z_step <= 0:
        raise GrammarError("z_step must be positive")
    segments: list[Segment] = []
    prev_end = None
    for i, gen in enumerate(generations):
        word = expand(grammar, gen)
        polylines = turtle_path(word, config)
        z = i * z_step
        for pl in polylines:
            pts = [(x, y, pz + z) for x, y, pz in pl]
            if prev_end is not None and math.dist(prev_end, pts[0]) > 1e-9:
                segments.append(
                    Segment(points=[prev_end, pts[0]], kind=TRAVEL, layer_index=i)
                )
            segments.append(Segment(points=pts, kind=EXTRUDE, layer_index=i))
            prev_end = pts[-1]
    tp = Toolpath(segments=segments, layer_height=z_step)
    tp.validate()
    return tp
