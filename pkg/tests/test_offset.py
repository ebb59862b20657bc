import math

import numpy as np
import pytest

from claypath.geom.offset import offset_contour
from claypath.geom.slicing import Contour

from helpers import circle_contour_vertices


def square_contour(side=100.0, center=(0.0, 0.0)):
    h = side / 2
    cx, cy = center
    verts = [(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
    return Contour(vertices=verts, z=0.0, orientation="outer")


def rasterized_inner_offset_area(vertices, distance, resolution=0.1):
    """Independent oracle: erosion area by brute-force point sampling.

    A sample point belongs to the eroded polygon iff it is inside and at
    least `distance` from every edge.
    """
    import shapely
    from shapely.geometry import Polygon

    poly = Polygon(vertices)
    minx, miny, maxx, maxy = poly.bounds
    xs = np.arange(minx, maxx, resolution)
    ys = np.arange(miny, maxy, resolution)
    gx, gy = np.meshgrid(xs, ys)
    inside = shapely.contains_xy(poly, gx.ravel(), gy.ravel())
    pts = shapely.points(np.column_stack([gx.ravel()[inside], gy.ravel()[inside]]))
    far = shapely.distance(pts, poly.exterior) >= distance
    return int(far.sum()) * resolution * resolution


def test_square_inward_10():
    result = offset_contour(square_contour(100.0), 10.0)
    assert len(result) == 1
    c = result[0]
    assert c.orientation == "outer"
    assert c.area == pytest.approx(80.0 * 80.0, rel=1e-9)
    xs = [v[0] for v in c.vertices]
    ys = [v[1] for v in c.vertices]
    assert (min(xs), max(xs)) == pytest.approx((-40.0, 40.0))
    assert (min(ys), max(ys)) == pytest.approx((-40.0, 40.0))


def test_square_offset_past_inradius_vanishes():
    assert offset_contour(square_contour(100.0), 60.0) == []


def test_outward_offset_grows():
    result = offset_contour(square_contour(100.0), -10.0)
    assert len(result) == 1
    # mitre join keeps square corners: area is exactly 120^2
    assert result[0].area == pytest.approx(120.0 * 120.0, rel=1e-9)


def test_convex_offset_area_against_rasterization_oracle():
    # irregular convex pentagon
    verts = [(0.0, 0.0), (60.0, -10.0), (95.0, 30.0), (50.0, 70.0), (-10.0, 40.0)]
    d = 8.0
    result = offset_contour(Contour(verts, 0.0, "outer"), d)
    got = sum(c.area for c in result)
    oracle = rasterized_inner_offset_area(verts, d, resolution=0.1)
    assert got == pytest.approx(oracle, rel=0.01)


def test_convex_offset_area_upper_bound():
    verts = circle_contour_vertices(50.0, n=128)
    c = Contour(verts, 0.0, "outer")
    d = 10.0
    area = c.area
    perimeter = c.perimeter
    result = offset_contour(c, d)
    got = sum(x.area for x in result)
    bound = area - perimeter * d + math.pi * d * d
    assert got <= bound * 1.01


def test_additivity_on_convex_contours():
    c = square_contour(100.0)
    once = offset_contour(c, 30.0)
    twice = offset_contour(offset_contour(c, 12.0)[0], 18.0)
    assert len(once) == len(twice) == 1
    va = sorted(once[0].vertices)
    vb = sorted(twice[0].vertices)
    assert len(va) == len(vb)
    for a, b in zip(va, vb):
        assert math.dist(a, b) < 1e-6


def test_concave_split_into_two():
    # dumbbell: two 40-wide lobes joined by a 4-wide neck
    verts = [
        (0, 0), (40, 0), (40, 18), (60, 18), (60, 0), (100, 0),
        (100, 40), (60, 40), (60, 22), (40, 22), (40, 40), (0, 40),
    ]
    result = offset_contour(Contour([(float(x), float(y)) for x, y in verts], 0.0, "outer"), 5.0)
    assert len(result) == 2
    for c in result:
        assert c.orientation == "outer"
