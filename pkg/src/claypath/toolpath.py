"""Toolpath data model: ordered extrude/travel polylines grouped by layer.

This is the common currency between the slicer, the pattern generators
and the motion compiler.  Toolpaths serialize to a stable JSON document
(millimetres, 6 decimal places) so every pipeline stage can be run from
files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

Point = tuple[float, float, float]

EXTRUDE = "extrude"
TRAVEL = "travel"

# endpoints closer than this are considered coincident when validating
JOIN_TOLERANCE_MM = 1e-6


class ToolpathError(ValueError):
    pass


def dist(a, b) -> float:
    return math.dist(a, b)


def polyline_length(points) -> float:
    return sum(math.dist(points[i], points[i + 1]) for i in range(len(points) - 1))


@dataclass
class Segment:
    points: list[Point]
    kind: str  # EXTRUDE or TRAVEL
    layer_index: int

    @property
    def length(self) -> float:
        return polyline_length(self.points)


@dataclass
class Toolpath:
    segments: list[Segment] = field(default_factory=list)
    layer_height: float = 0.0

    def validate(self) -> None:
        last_layer = None
        for i, seg in enumerate(self.segments):
            if seg.kind not in (EXTRUDE, TRAVEL):
                raise ToolpathError(f"segment {i}: unknown kind {seg.kind!r}")
            if seg.kind == EXTRUDE and len(seg.points) < 2:
                raise ToolpathError(f"segment {i}: extrude segment needs >=2 points")
            if len(seg.points) < 1:
                raise ToolpathError(f"segment {i}: empty segment")
            if last_layer is not None and seg.layer_index < last_layer:
                raise ToolpathError(
                    f"segment {i}: layer index decreases ({last_layer} -> {seg.layer_index})"
                )
            if seg.kind == TRAVEL and len(seg.points) >= 2 and seg.length < JOIN_TOLERANCE_MM:
                raise ToolpathError(f"segment {i}: zero-length travel")
            last_layer = seg.layer_index

    @property
    def extrude_length(self) -> float:
        return sum(s.length for s in self.segments if s.kind == EXTRUDE)

    @property
    def travel_length(self) -> float:
        return sum(s.length for s in self.segments if s.kind == TRAVEL)

    def extrude_segments(self):
        return [s for s in self.segments if s.kind == EXTRUDE]

    def layer_indices(self):
        return sorted({s.layer_index for s in self.segments})

    def to_json(self) -> str:
        doc = {
            "layer_height": round(self.layer_height, 6),
            "segments": [
                {
                    "kind": seg.kind,
                    "layer": seg.layer_index,
                    "points": [[round(c, 6) for c in p] for p in seg.points],
                }
                for seg in self.segments
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Toolpath":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ToolpathError(f"bad toolpath JSON: {e}") from e
        try:
            segments = [
                Segment(
                    points=[tuple(float(c) for c in p) for p in s["points"]],
                    kind=s["kind"],
                    layer_index=int(s["layer"]),
                )
                for s in doc["segments"]
            ]
            tp = cls(segments=segments, layer_height=float(doc["layer_height"]))
        except (KeyError, TypeError) as e:
            raise ToolpathError(f"bad toolpath JSON structure: {e}") from e
        tp.validate()
        return tp
