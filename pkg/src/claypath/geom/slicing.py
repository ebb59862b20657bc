"""Planar slicing: mesh -> stack of layers of closed, oriented contours.

Slice planes sit mid-layer (z_min + (k+0.5)*h) so flat top/bottom faces
never coincide with a cutting plane.  Cross-section segments are welded
at 1e-4 mm and chained into closed loops; loop nesting parity decides
outer vs hole orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import MultiPolygon, Point as ShPoint, Polygon

from .mesh import Mesh

WELD_TOLERANCE_MM = 1e-4

OUTER = "outer"
HOLE = "hole"


class SliceError(ValueError):
    pass


def signed_area(vertices) -> float:
    s = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i][0], vertices[i][1]
        x2, y2 = vertices[(i + 1) % n][0], vertices[(i + 1) % n][1]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


@dataclass
class Contour:
    vertices: list[tuple[float, float]]  # closed implicitly, no repeated endpoint
    z: float
    orientation: str  # OUTER (ccw) or HOLE (cw)

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise SliceError("contour needs >=3 vertices")

    @property
    def area(self) -> float:
        return abs(signed_area(self.vertices))

    @property
    def perimeter(self) -> float:
        n = len(self.vertices)
        return sum(
            math.dist(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)
        )

    def polygon(self) -> Polygon:
        return Polygon(self.vertices)

    def points3d(self, close: bool = False):
        pts = [(x, y, self.z) for x, y in self.vertices]
        if close:
            pts.append(pts[0])
        return pts


@dataclass
class Layer:
    index: int
    z: float
    contours: list[Contour] = field(default_factory=list)

    def outers(self):
        return [c for c in self.contours if c.orientation == OUTER]

    def holes(self):
        return [c for c in self.contours if c.orientation == HOLE]

    def region(self):
        """Outer contours minus holes, as a shapely (Multi)Polygon."""
        outers = [c.polygon() for c in self.outers()]
        holes = [c.polygon() for c in self.holes()]
        polys = []
        for outer in outers:
            inner = [h.exterior.coords for h in holes if outer.contains(h.representative_point())]
            polys.append(Polygon(outer.exterior.coords, inner))
        if not polys:
            return Polygon()
        return polys[0] if len(polys) == 1 else MultiPolygon(polys)


def slice_mesh(mesh: Mesh, layer_height: float) -> list[Layer]:
    if not mesh.watertight:
        raise SliceError("non-watertight mesh")
    if layer_height <= 0:
        raise SliceError("layer height must be positive")
    z_min, z_max = mesh.z_range
    layers = []
    k = 0
    while True:
        z = z_min + (k + 0.5) * layer_height
        if z >= z_max:
            break
        contours = _cross_section(mesh.triangles, z, k)
        layers.append(Layer(index=k, z=z, contours=contours))
        k += 1
    return layers


def _cross_section(tris: np.ndarray, z: float, layer_index: int) -> list[Contour]:
    segments = _plane_segments(tris, z)
    if not segments:
        return []
    loops = _chain_loops(segments, layer_index)
    return _orient_loops(loops, z)


def _plane_segments(tris: np.ndarray, z: float):
    """Intersect every triangle with the plane; yields 2D segments."""
    segs = []
    zs = tris[:, :, 2]
    d = zs - z
    # nudge exact hits off the plane; mid-layer planes make these rare
    d = np.where(d == 0.0, 1e-12, d)
    below = d < 0
    counts = below.sum(axis=1)
    crossing = np.nonzero((counts == 1) | (counts == 2))[0]
    for ti in crossing:
        tri = tris[ti]
        dd = d[ti]
        pts = []
        for i in range(3):
            j = (i + 1) % 3
            if (dd[i] < 0) != (dd[j] < 0):
                t = dd[i] / (dd[i] - dd[j])
                p = tri[i] + t * (tri[j] - tri[i])
                pts.append((float(p[0]), float(p[1])))
        if len(pts) == 2 and math.dist(pts[0], pts[1]) > 1e-12:
            segs.append((pts[0], pts[1]))
    return segs


def _chain_loops(segments, layer_index: int):
    def key(p):
        return (round(p[0] / WELD_TOLERANCE_MM), round(p[1] / WELD_TOLERANCE_MM))

    canonical: dict[tuple, tuple[float, float]] = {}

    def weld(p):
        k = key(p)
        if k not in canonical:
            canonical[k] = p
        return canonical[k]

    adjacency: dict[tuple, list[int]] = {}
    welded = []
    for i, (a, b) in enumerate(segments):
        a, b = weld(a), weld(b)
        if a == b:
            continue
        welded.append((a, b))
        adjacency.setdefault(a, []).append(len(welded) - 1)
        adjacency.setdefault(b, []).append(len(welded) - 1)

    used = [False] * len(welded)
    loops = []
    for start in range(len(welded)):
        if used[start]:
            continue
        a, b = welded[start]
        used[start] = True
        loop = [a, b]
        current = b
        while True:
            nxt = None
            for si in adjacency.get(current, ()):
                if not used[si]:
                    nxt = si
                    break
            if nxt is None:
                break
            used[nxt] = True
            p, q = welded[nxt]
            current = q if p == current else p
            loop.append(current)
        if loop[0] != loop[-1]:
            raise SliceError(f"open cross-section loop at layer {layer_index}")
        loop.pop()
        if len(loop) >= 3:
            loops.append(loop)
    return loops


def _orient_loops(loops, z: float) -> list[Contour]:
    polys = [Polygon(lp) for lp in loops]
    contours = []
    for i, lp in enumerate(loops):
        probe = ShPoint(lp[0])
        depth = sum(
            1
            for j, other in enumerate(polys)
            if j != i and other.contains(probe)
        )
        orientation = OUTER if depth % 2 == 0 else HOLE
        area = signed_area(lp)
        want_ccw = orientation == OUTER
        if (area > 0) != want_ccw:
            lp = lp[::-1]
        contours.append(Contour(vertices=[tuple(p) for p in lp], z=z, orientation=orientation))
    return contours
