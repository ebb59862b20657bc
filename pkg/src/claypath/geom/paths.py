"""Path generation on sliced layers: spiralization, shell-bounded infill
and overhang flagging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from shapely.geometry import LineString, Point as ShPoint

from ..toolpath import EXTRUDE, Segment, Toolpath
from .offset import _erode, _polygons
from .slicing import Layer

COVER_TOLERANCE_MM = 1e-6


class PathError(ValueError):
    pass


def seam_start_index(vertices, prev_end) -> int:
    """Seam rule: vertex nearest to the previous loop's end, ties to the lowest index."""
    if prev_end is None:
        return 0
    best, best_d = 0, float("inf")
    for i, v in enumerate(vertices):
        d = math.dist((v[0], v[1]), (prev_end[0], prev_end[1]))
        if d < best_d - 1e-12:
            best, best_d = i, d
    return best


def spiralize(layers: list[Layer]) -> Toolpath:
    """Stack of single-contour layers -> one continuous extrusion with ramped z."""
    if not layers:
        raise PathError("no layers")
    loops = []
    for layer in layers:
        outers = layer.outers()
        if len(outers) != 1 or layer.holes():
            raise PathError(
                f"layer {layer.index}: spiralize needs exactly one outer contour and no holes"
            )
        loops.append(outers[0])

    points: list[tuple[float, float, float]] = []
    prev_end = None
    for k, contour in enumerate(loops):
        verts = contour.vertices
        start = seam_start_index(verts, prev_end)
        ring = verts[start:] + verts[:start]
        ring.append(ring[0])  # close the loop
        z0 = contour.z
        z1 = loops[k + 1].z if k + 1 < len(loops) else z0
        # cumulative arc length drives the z ramp
        lengths = [0.0]
        for i in range(1, len(ring)):
            lengths.append(lengths[-1] + math.dist(ring[i - 1], ring[i]))
        total = lengths[-1] or 1.0
        for i, (x, y) in enumerate(ring):
            z = z0 + (z1 - z0) * lengths[i] / total
            p = (x, y, z)
            if points and math.dist(points[-1], p) < 1e-9:
                continue
            points.append(p)
        prev_end = points[-1]
    return Toolpath(
        segments=[Segment(points=points, kind=EXTRUDE, layer_index=0)],
        layer_height=layers[1].z - layers[0].z if len(layers) > 1 else layers[0].z * 2,
    )


def _shell_region(layer: Layer, shell_depth: float):
    region = layer.region()
    if region.is_empty or region.area <= 0:
        raise PathError(f"layer {layer.index}: empty region")
    core = _erode(region, shell_depth)
    if core.is_empty or core.area <= 0:
        return region, region  # hollow core vanished: solid fill
    return region.difference(core), region


def infill_region(layer: Layer, shell_depth: float, spacing: float, pattern: str = "zigzag"):
    """Infill polylines confined to the shell band inside the outer wall."""
    if shell_depth <= 0 or spacing <= 0:
        raise PathError("shell_depth and spacing must be positive")
    annulus, _ = _shell_region(layer, shell_depth)
    if pattern == "zigzag":
        return _zigzag(annulus, spacing, layer.z)
    if pattern == "concentric":
        return _concentric(layer, shell_depth, spacing)
    raise PathError(f"unknown infill pattern {pattern!r}")


def _zigzag(annulus, spacing: float, z: float):
    minx, miny, maxx, maxy = annulus.bounds
    tolerant = annulus.buffer(COVER_TOLERANCE_MM)
    rows = []
    y = miny + spacing / 2
    while y < maxy:
        scan = LineString([(minx - 1.0, y), (maxx + 1.0, y)])
        cut = annulus.intersection(scan)
        segs = []
        geoms = getattr(cut, "geoms", [cut] if not cut.is_empty else [])
        for g in geoms:
            if isinstance(g, LineString) and g.length > 1e-9:
                (x1, y1), (x2, y2) = g.coords[0], g.coords[-1]
                segs.append(((min(x1, x2), y), (max(x1, x2), y)))
        segs.sort()
        if segs:
            rows.append(segs)
        y += spacing

    polylines: list[list[tuple[float, float, float]]] = []
    open_chains: list[list[tuple[float, float, float]]] = []
    for r, segs in enumerate(rows):
        if r % 2 == 1:
            segs = [(b, a) for a, b in reversed(segs)]
        next_chains = []
        for a, b in segs:
            attached = None
            for chain in open_chains:
                end = chain[-1]
                link = LineString([(end[0], end[1]), a])
                if link.length <= 2 * spacing and tolerant.covers(link):
                    attached = chain
                    break
            if attached is not None:
                open_chains.remove(attached)
                attached.append((a[0], a[1], z))
                attached.append((b[0], b[1], z))
                next_chains.append(attached)
            else:
                next_chains.append([(a[0], a[1], z), (b[0], b[1], z)])
        polylines.extend(open_chains)  # chains not continued are finished
        open_chains = next_chains
    polylines.extend(open_chains)
    return polylines


def _concentric(layer: Layer, shell_depth: float, spacing: float):
    region = layer.region()
    polylines = []
    d = spacing
    while d <= shell_depth + 1e-9:
        ring = _erode(region, d)
        if ring.is_empty:
            break
        for poly in _polygons(ring):
            for boundary in [poly.exterior, *poly.interiors]:
                pts = [(x, y, layer.z) for x, y in boundary.coords]
                polylines.append(pts)
        d += spacing
    return polylines


@dataclass
class OverhangFlag:
    layer_index: int
    arc: list[tuple[float, float, float]]
    angle_deg: float


def overhang_flags(layers: list[Layer], max_angle_deg: float = 30.0) -> list[OverhangFlag]:
    """Flag wall arcs steeper than max_angle_deg relative to the layer below."""
    if len(layers) < 2:
        raise PathError("overhang analysis needs >=2 layers")
    flags: list[OverhangFlag] = []
    for lower, upper in zip(layers, layers[1:]):
        dz = upper.z - lower.z
        support = lower.region()
        for contour in upper.outers():
            samples = _densify_ring(contour.vertices, step=2.0)
            flagged = []
            for x, y in samples:
                p = ShPoint(x, y)
                d = 0.0 if support.covers(p) else p.distance(support)
                angle = math.degrees(math.atan2(d, dz))
                flagged.append((x, y, angle) if angle > max_angle_deg else None)
            flags.extend(_group_arcs(flagged, upper.index, contour.z))
    return flags


def _densify_ring(vertices, step: float):
    out = []
    n = len(vertices)
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        length = math.dist(a, b)
        subdiv = max(1, int(math.ceil(length / step)))
        for j in range(subdiv):
            t = j / subdiv
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return out


def _group_arcs(flagged, layer_index: int, z: float):
    n = len(flagged)
    if n == 0:
        return []
    arcs = []
    current = []
    for entry in flagged:
        if entry is not None:
            current.append(entry)
        elif current:
            arcs.append(current)
            current = []
    if current:
        # merge wraparound with the first arc
        if arcs and flagged[0] is not None and flagged[-1] is not None:
            arcs[0] = current + arcs[0]
        else:
            arcs.append(current)
    return [
        OverhangFlag(
            layer_index=layer_index,
            arc=[(x, y, z) for x, y, _ in arc],
            angle_deg=max(a for _, _, a in arc),
        )
        for arc in arcs
    ]
