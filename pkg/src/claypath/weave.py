"""Braided toolpaths built directly from a ring of control points.

Every layer traverses the ring with a fixed stride k: point i connects to
point i+k (mod n).  With gcd(n, k) == 1 the traversal is one closed star
walk; otherwise it decomposes into gcd(n, k) loops joined by travels.
Layers stack at layer_height increments, optionally twisting the ring a
little more each layer, which is what produces the intertwined look.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geom.paths import seam_start_index
from .toolpath import EXTRUDE, TRAVEL, Segment, Toolpath


class WeaveError(ValueError):
    pass


@dataclass
class WeaveSpec:
    ring_points: int
    stride: int
    layers: int
    layer_height: float
    # circle base curve; an explicit closed polyline may be given instead
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 50.0
    base_polyline: list[tuple[float, float]] | None = field(default=None)

    def validate(self):
        if self.ring_points < 3:
            raise WeaveError("ring needs >=3 points")
        if not (1 <= self.stride < self.ring_points):
            raise WeaveError("stride must satisfy 1 <= k < n")
        if self.layers < 1:
            raise WeaveError("need >=1 layer")
        if self.layer_height <= 0:
            raise WeaveError("layer_height must be positive")

    def ring(self) -> list[tuple[float, float]]:
        n = self.ring_points
        if self.base_polyline is not None:
            return _resample_closed(self.base_polyline, n)
        cx, cy = self.center
        return [
            (
                cx + self.radius * math.cos(2 * math.pi * i / n),
                cy + self.radius * math.sin(2 * math.pi * i / n),
            )
            for i in range(n)
        ]

    @classmethod
    def from_dict(cls, doc: dict) -> "WeaveSpec":
        base = doc.get("base_curve", {})
        kwargs = dict(
            ring_points=int(doc["ring_points"]),
            stride=int(doc["stride"]),
            layers=int(doc["layers"]),
            layer_height=float(doc["layer_height"]),
        )
        if "polyline" in base:
            kwargs["base_polyline"] = [tuple(map(float, p)) for p in base["polyline"]]
        else:
            if "center" in base:
                kwargs["center"] = tuple(map(float, base["center"]))
            if "radius" in base:
                kwargs["radius"] = float(base["radius"])
        spec = cls(**kwargs)
        spec.validate()
        return spec


def _resample_closed(polyline, n: int):
    pts = list(polyline)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    lengths = [math.dist(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]
    total = sum(lengths)
    out = []
    target = 0.0
    acc = 0.0
    i = 0
    for k in range(n):
        target = total * k / n
        while acc + lengths[i] < target - 1e-12:
            acc += lengths[i]
            i += 1
        a, b = pts[i], pts[(i + 1) % len(pts)]
        t = (target - acc) / lengths[i] if lengths[i] > 0 else 0.0
        out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return out


def _loops_for_layer(ring, stride: int):
    """Star-stride traversal: gcd(n, k) closed loops covering every point once."""
    n = len(ring)
    g = math.gcd(n, stride)
    loops = []
    for start in range(g):
        loop = []
        i = start
        while True:
            loop.append(ring[i])
            i = (i + stride) % n
            if i == start:
                break
        loops.append(loop)
    return loops


def weave_path(spec: WeaveSpec) -> Toolpath:
    return twist(spec, 0.0)


def twist(spec: WeaveSpec, per_layer_rotation_deg: float) -> Toolpath:
    """Weave with the ring rotated by rotation*layer_index about its centroid."""
    spec.validate()
    ring0 = spec.ring()
    cx = sum(p[0] for p in ring0) / len(ring0)
    cy = sum(p[1] for p in ring0) / len(ring0)
    segments: list[Segment] = []
    prev_end: tuple[float, float, float] | None = None
    for layer in range(spec.layers):
        z = layer * spec.layer_height
        theta = math.radians(per_layer_rotation_deg * layer)
        c, s = math.cos(theta), math.sin(theta)
        ring = [
            (cx + (x - cx) * c - (y - cy) * s, cy + (x - cx) * s + (y - cy) * c)
            for x, y in ring0
        ]
        for loop in _loops_for_layer(ring, spec.stride):
            start = seam_start_index(loop, prev_end)
            ordered = loop[start:] + loop[:start]
            pts = [(x, y, z) for x, y in ordered]
            pts.append(pts[0])  # close the traversal
            if prev_end is not None and math.dist(prev_end, pts[0]) > 1e-9:
                segments.append(Segment(points=[prev_end, pts[0]], kind=TRAVEL, layer_index=layer))
            segments.append(Segment(points=pts, kind=EXTRUDE, layer_index=layer))
            prev_end = pts[-1]
    tp = Toolpath(segments=segments, layer_height=spec.layer_height)
    tp.validate()
    return tp
