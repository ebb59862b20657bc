"""Mesh ingestion: STL (ASCII + binary) and OBJ, with watertightness analysis.

Only triangle soup is needed downstream; OBJ faces with more than three
vertices are fan-triangulated.  Degenerate triangles (area < 1e-9 mm^2)
are dropped at ingest and counted.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

DEGENERATE_AREA_MM2 = 1e-9


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    # (n, 3, 3) float64 array: triangle, vertex, xyz in mm
    triangles: np.ndarray
    bbox: tuple[np.ndarray, np.ndarray] = field(init=False)
    watertight: bool = field(init=False)
    degenerate_dropped: int = 0

    def __post_init__(self):
        tris = np.asarray(self.triangles, dtype=float).reshape(-1, 3, 3)
        tris, dropped = _drop_degenerate(tris)
        self.triangles = tris
        self.degenerate_dropped += dropped
        if dropped:
            log.warning("dropped %d degenerate triangles at ingest", dropped)
        if len(tris) == 0:
            raise MeshError("mesh has no non-degenerate triangles")
        pts = tris.reshape(-1, 3)
        self.bbox = (pts.min(axis=0), pts.max(axis=0))
        self.watertight = _is_watertight(tris)

    def translated(self, offset) -> "Mesh":
        return Mesh(self.triangles + np.asarray(offset, dtype=float))

    def scaled_about(self, factor: float, center) -> "Mesh":
        c = np.asarray(center, dtype=float)
        return Mesh((self.triangles - c) * factor + c)

    @property
    def z_range(self) -> tuple[float, float]:
        return float(self.bbox[0][2]), float(self.bbox[1][2])


def _triangle_areas(tris: np.ndarray) -> np.ndarray:
    a = tris[:, 1] - tris[:, 0]
    b = tris[:, 2] - tris[:, 0]
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)


def _drop_degenerate(tris: np.ndarray) -> tuple[np.ndarray, int]:
    if len(tris) == 0:
        return tris, 0
    keep = _triangle_areas(tris) >= DEGENERATE_AREA_MM2
    return tris[keep], int((~keep).sum())


def _is_watertight(tris: np.ndarray) -> bool:
    """Every undirected edge, keyed by vertex coordinates, shared by exactly 2 triangles."""
    counts: dict[tuple, int] = {}
    for tri in tris:
        verts = [tuple(v) for v in tri]
        for i in range(3):
            edge = tuple(sorted((verts[i], verts[(i + 1) % 3])))
            counts[edge] = counts.get(edge, 0) + 1
    return all(c == 2 for c in counts.values())


def load_mesh(data: bytes, fmt: str | None = None) -> Mesh:
    """Parse raw file bytes into a Mesh.  fmt in {stl_ascii, stl_binary, obj} or None to sniff."""
    if not data:
        raise MeshError("empty input")
    if fmt is None:
        fmt = _sniff_format(data)
    if fmt == "stl_ascii":
        return Mesh(_parse_stl_ascii(data))
    if fmt == "stl_binary":
        return Mesh(_parse_stl_binary(data))
    if fmt == "obj":
        return Mesh(_parse_obj(data))
    raise MeshError(f"unknown mesh format {fmt!r}")


def _sniff_format(data: bytes) -> str:
    head = data[:512].lstrip()
    if head.startswith(b"solid") and b"facet" in data[:4096]:
        return "stl_ascii"
    if head.startswith((b"v ", b"v\t", b"#", b"vn ", b"o ", b"mtllib")) or b"\nf " in data[:4096]:
        return "obj"
    return "stl_binary"


def _parse_stl_ascii(data: bytes) -> np.ndarray:
    try:
        text = data.decode("utf-8", errors="replace")
    except Exception as e:  # pragma: no cover
        raise MeshError(f"undecodable ASCII STL: {e}") from e
    tris = []
    current: list[tuple[float, float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            if len(parts) != 4:
                raise MeshError(f"unparsable ASCII facet at line {lineno}: {raw.strip()!r}")
            try:
                current.append(tuple(float(x) for x in parts[1:4]))
            except ValueError:
                raise MeshError(f"unparsable ASCII facet at line {lineno}: {raw.strip()!r}")
        elif parts[0] == "endfacet":
            if len(current) != 3:
                raise MeshError(f"unparsable ASCII facet ending at line {lineno}")
            tris.append(current)
            current = []
    if current:
        raise MeshError("unparsable ASCII facet: unterminated facet")
    if not tris:
        raise MeshError("ASCII STL contains no facets")
    return np.array(tris, dtype=float)


def _parse_stl_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MeshError("truncated binary header")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + count * 50
    available = (len(data) - 84) // 50
    if len(data) < expected:
        raise MeshError(f"triangle count mismatch: header says {count}, file holds {available}")
    tris = np.empty((count, 3, 3), dtype=float)
    off = 84
    for i in range(count):
        vals = struct.unpack_from("<12f", data, off)
        tris[i] = np.array(vals[3:12]).reshape(3, 3)  # skip normal
        off += 50
    return tris


def write_stl_binary(mesh: Mesh) -> bytes:
    tris = mesh.triangles
    out = bytearray(b"claypath".ljust(80, b"\0"))
    out += struct.pack("<I", len(tris))
    for tri in tris:
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        norm = np.linalg.norm(n)
        n = n / norm if norm > 0 else n
        out += struct.pack("<12fH", *n, *tri.reshape(9), 0)
    return bytes(out)


def _parse_obj(data: bytes) -> np.ndarray:
    text = data.decode("utf-8", errors="replace")
    verts: list[tuple[float, float, float]] = []
    tris = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshError(f"bad vertex at line {lineno}")
            verts.append(tuple(float(x) for x in parts[1:4]))
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                s = tok.split("/")[0]
                try:
                    i = int(s)
                except ValueError:
                    raise MeshError(f"bad face index at line {lineno}: {tok!r}")
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise MeshError(f"face with <3 indices at line {lineno}")
            for a, b in zip(idx[1:], idx[2:]):
                tris.append((verts[idx[0]], verts[a], verts[b]))
    if not tris:
        raise MeshError("OBJ contains no faces")
    return np.array(tris, dtype=float)
