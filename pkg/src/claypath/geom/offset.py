"""Polygon offsetting for walls and shells.

Backed by shapely's buffer with mitre joins so straight-sided contours
stay straight-sided.  Inward-positive sign convention: positive
distances erode the contour, negative distances grow it.  An offset may
split a contour into several pieces or erase it entirely; both are valid
results.
"""

from __future__ import annotations

from shapely.geometry import MultiPolygon, Polygon
from shapely.validation import make_valid

from .slicing import Contour

MITRE_LIMIT = 1e6
CLEANUP_TOLERANCE_MM = 1e-6


def _erode(geom, distance: float):
    out = geom.buffer(-distance, join_style="mitre", mitre_limit=MITRE_LIMIT)
    if not out.is_valid:
        out = make_valid(out)
    return out


def _polygons(geom):
    if geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    # GeometryCollection from make_valid: keep polygonal parts only
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon)]


def _ring_vertices(ring, ccw: bool):
    coords = list(ring.coords)[:-1]
    area = 0.0
    for i in range(len(coords)):
        x1, y1 = coords[i]
        x2, y2 = coords[(i + 1) % len(coords)]
        area += x1 * y2 - x2 * y1
    if (area > 0) != ccw:
        coords = coords[::-1]
    return [tuple(c) for c in coords]


def polygon_to_contours(poly: Polygon, z: float) -> list[Contour]:
    out = [Contour(_ring_vertices(poly.exterior, ccw=True), z, "outer")]
    for interior in poly.interiors:
        out.append(Contour(_ring_vertices(interior, ccw=False), z, "hole"))
    return out


def offset_contour(contour: Contour, distance: float) -> list[Contour]:
    """Offset a contour by `distance` mm (inward positive).

    Returns zero or more contours; an offset past the inradius vanishes.
    """
    poly = Polygon(contour.vertices)
    if not poly.is_valid:
        poly = make_valid(poly)
    result = _erode(poly, distance)
    contours: list[Contour] = []
    for p in _polygons(result):
        p = p.simplify(CLEANUP_TOLERANCE_MM)
        if p.is_empty or p.area <= 0:
            continue
        contours.extend(polygon_to_contours(p, contour.z))
    return contours
