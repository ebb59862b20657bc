"""Shared geometry builders for the test suite."""

from __future__ import annotations

import math
import struct

import numpy as np

from claypath.geom.mesh import Mesh


def tetra_ascii_stl() -> str:
    verts = [(0, 0, 0), (10, 0, 0), (0, 10, 0), (0, 0, 10)]
    faces = [(0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)]
    lines = ["solid tetra"]
    for f in faces:
        lines.append("  facet normal 0 0 0")
        lines.append("    outer loop")
        for vi in f:
            x, y, z = verts[vi]
            lines.append(f"      vertex {x} {y} {z}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid tetra")
    return "\n".join(lines)


def box_triangles(sx=10.0, sy=10.0, sz=10.0, origin=(0.0, 0.0, 0.0)):
    ox, oy, oz = origin
    v = [
        (ox, oy, oz), (ox + sx, oy, oz), (ox + sx, oy + sy, oz), (ox, oy + sy, oz),
        (ox, oy, oz + sz), (ox + sx, oy, oz + sz), (ox + sx, oy + sy, oz + sz), (ox, oy + sy, oz + sz),
    ]
    quads = [
        (0, 3, 2, 1),  # bottom
        (4, 5, 6, 7),  # top
        (0, 1, 5, 4),
        (1, 2, 6, 5),
        (2, 3, 7, 6),
        (3, 0, 4, 7),
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append((v[a], v[b], v[c]))
        tris.append((v[a], v[c], v[d]))
    return np.array(tris, dtype=float)


def stl_binary_bytes(tris: np.ndarray, declared_count: int | None = None) -> bytes:
    count = declared_count if declared_count is not None else len(tris)
    out = bytearray(b"\0" * 80)
    out += struct.pack("<I", count)
    for tri in tris:
        out += struct.pack("<12fH", 0, 0, 0, *np.asarray(tri).reshape(9), 0)
    return bytes(out)


def cube_mesh(size=10.0) -> Mesh:
    return Mesh(box_triangles(size, size, size))


def revolve_mesh(base_radius: float, top_radius: float, height: float, n: int = 64) -> Mesh:
    """Capped solid of revolution between two rings (cylinder, cone, frustum)."""
    def ring(r, z):
        return [
            (r * math.cos(2 * math.pi * i / n), r * math.sin(2 * math.pi * i / n), z)
            for i in range(n)
        ]

    bottom = ring(base_radius, 0.0)
    tris = []
    cb = (0.0, 0.0, 0.0)
    for i in range(n):
        tris.append((cb, bottom[(i + 1) % n], bottom[i]))
    if top_radius == 0.0:
        apex = (0.0, 0.0, height)
        for i in range(n):
            tris.append((bottom[i], bottom[(i + 1) % n], apex))
    else:
        top = ring(top_radius, height)
        ct = (0.0, 0.0, height)
        for i in range(n):
            j = (i + 1) % n
            tris.append((bottom[i], bottom[j], top[j]))
            tris.append((bottom[i], top[j], top[i]))
            tris.append((ct, top[i], top[j]))
    return Mesh(np.array(tris, dtype=float))


def cylinder_mesh(radius=40.0, height=150.0, n=32) -> Mesh:
    return revolve_mesh(radius, radius, height, n)


def cone_mesh(base_radius=50.0, height=50.0, n=256) -> Mesh:
    return revolve_mesh(base_radius, 0.0, height, n)


def circle_contour_vertices(radius, n=64, center=(0.0, 0.0), phase=0.0):
    return [
        (
            center[0] + radius * math.cos(phase + 2 * math.pi * i / n),
            center[1] + radius * math.sin(phase + 2 * math.pi * i / n),
        )
        for i in range(n)
    ]
