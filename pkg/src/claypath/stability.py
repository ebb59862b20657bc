"""Physical viability checks for wet-clay prints.

Quasi-static only: cumulative centre of mass against the base support
polygon, compressive stress against a linearly hardening bearing
strength, a minimum layer-time gate for drying, and uniform pre-firing
shrinkage compensation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from shapely.geometry import Point as ShPoint

from .geom.mesh import Mesh
from .geom.slicing import Layer
from .geom.offset import _erode
from .toolpath import EXTRUDE, Toolpath

G_M_S2 = 9.80665
MM3_TO_M3 = 1e-9
MM2_TO_M2 = 1e-6

STABLE = "stable"
TIPPING = "tipping"
CRUSHING = "crushing"
TOO_FAST = "too_fast"


class StabilityError(ValueError):
    pass


@dataclass
class MaterialMix:
    clay_powder_kg: float
    sand_kg: float = 0.0
    paper_pulp_kg: float = 0.0
    water_kg: float = 0.0
    wet_density_kg_m3: float = 1800.0
    bearing_strength_pa: float = 20_000.0
    drying_gain_pa_per_min: float = 50.0
    fired_shrinkage: dict[float, float] = field(default_factory=dict)  # deg C -> fraction

    def validate(self):
        if self.clay_powder_kg <= 0:
            raise StabilityError("clay_powder_kg must be positive")
        if min(self.sand_kg, self.paper_pulp_kg, self.water_kg) < 0:
            raise StabilityError("ingredient masses must be >= 0")
        if self.wet_density_kg_m3 <= 0:
            raise StabilityError("density must be positive")
        for temp, frac in self.fired_shrinkage.items():
            if not (0 <= frac < 1):
                raise StabilityError(f"shrinkage fraction at {temp} C out of [0, 1)")

    @classmethod
    def from_json(cls, text: str) -> "MaterialMix":
        doc = json.loads(text)
        shrink = {float(k): float(v) for k, v in doc.pop("fired_shrinkage", {}).items()}
        mix = cls(**doc, fired_shrinkage=shrink)
        mix.validate()
        return mix

    def to_json(self) -> str:
        doc = {k: v for k, v in vars(self).items() if k != "fired_shrinkage"}
        doc["fired_shrinkage"] = {str(k): v for k, v in self.fired_shrinkage.items()}
        return json.dumps(doc)


@dataclass
class ComEntry:
    layer_index: int
    cumulative_mass_kg: float
    com: tuple[float, float, float]


def _layer_edges(toolpath: Toolpath):
    """Per layer: list of (midpoint, length) of extrude edges."""
    layers: dict[int, list[tuple[tuple[float, float, float], float]]] = {}
    for seg in toolpath.segments:
        if seg.kind != EXTRUDE:
            continue
        edges = layers.setdefault(seg.layer_index, [])
        for a, b in zip(seg.points, seg.points[1:]):
            length = math.dist(a, b)
            if length <= 0:
                continue
            mid = tuple((a[k] + b[k]) / 2 for k in range(3))
            edges.append((mid, length))
    return layers


def cumulative_com(toolpath: Toolpath, bead_area_mm2: float, mix: MaterialMix) -> list[ComEntry]:
    """Mass-weighted COM of everything deposited up to and including each layer."""
    if bead_area_mm2 <= 0:
        raise StabilityError("bead area must be positive")
    layers = _layer_edges(toolpath)
    if not layers:
        raise StabilityError("toolpath has no extrude segments")
    kg_per_mm = bead_area_mm2 * MM3_TO_M3 * mix.wet_density_kg_m3  # per mm of bead
    series = []
    total_mass = 0.0
    moment = [0.0, 0.0, 0.0]
    for layer_index in sorted(layers):
        for mid, length in layers[layer_index]:
            m = length * kg_per_mm
            total_mass += m
            for k in range(3):
                moment[k] += m * mid[k]
        series.append(
            ComEntry(
                layer_index=layer_index,
                cumulative_mass_kg=total_mass,
                com=tuple(mo / total_mass for mo in moment),
            )
        )
    return series


def support_check(com_series: list[ComEntry], base_layer: Layer, margin_mm: float = 0.0):
    """First layer whose cumulative COM leaves the shrunken base hull, if any.

    Returns (verdict, per-layer support margins).  Margin is the signed
    distance from the COM projection to the hull boundary, positive inside.
    """
    outers = base_layer.outers()
    if not outers:
        raise StabilityError("base layer has no outer contour")
    hull = outers[0].polygon()
    for c in outers[1:]:
        hull = hull.union(c.polygon())
    hull = hull.convex_hull
    support = _erode(hull, margin_mm) if margin_mm > 0 else hull
    margins = []
    verdict = (STABLE, None)
    for entry in com_series:
        p = ShPoint(entry.com[0], entry.com[1])
        if support.is_empty:
            inside = False
        else:
            inside = support.covers(p)
        d = p.distance(support.boundary) if not support.is_empty else 0.0
        margins.append(d if inside else -d if d > 0 else -1e-9)
        if not inside and verdict[0] == STABLE:
            verdict = (TIPPING, entry.layer_index)
    return verdict, margins


def load_check(
    toolpath: Toolpath,
    bead_area_mm2: float,
    mix: MaterialMix,
    layer_times_s: list[float],
):
    """Compressive stress per layer vs. drying-hardened bearing strength.

    Returns (verdict, per-layer stresses in Pa).  The bearing cross
    section of a layer is its wall length times the bead width.
    """
    if bead_area_mm2 <= 0:
        raise StabilityError("bead area must be positive")
    layers = _layer_edges(toolpath)
    if not layers:
        raise StabilityError("toolpath has no extrude segments")
    if toolpath.layer_height <= 0:
        raise StabilityError("toolpath layer_height must be positive for load check")
    bead_width_mm = bead_area_mm2 / toolpath.layer_height
    indices = sorted(layers)
    kg_per_mm = bead_area_mm2 * MM3_TO_M3 * mix.wet_density_kg_m3
    layer_mass = {i: sum(length for _, length in layers[i]) * kg_per_mm for i in indices}
    layer_wall = {i: sum(length for _, length in layers[i]) for i in indices}
    times = list(layer_times_s) + [0.0] * (len(indices) - len(layer_times_s))

    stresses = []
    verdict = (STABLE, None)
    for pos, j in enumerate(indices):
        mass_above = sum(layer_mass[i] for i in indices[pos + 1 :])
        bearing_mm2 = layer_wall[j] * bead_width_mm
        stress = G_M_S2 * mass_above / (bearing_mm2 * MM2_TO_M2) if bearing_mm2 > 0 else 0.0
        age_min = sum(times[pos + 1 : len(indices)]) / 60.0
        allowed = mix.bearing_strength_pa + mix.drying_gain_pa_per_min * age_min
        stresses.append(stress)
        if stress > allowed and verdict[0] == STABLE:
            verdict = (CRUSHING, j)
    return verdict, stresses


def drying_gate(layer_times_s: list[float], min_layer_time_s: float):
    if min_layer_time_s <= 0:
        raise StabilityError("min_layer_time_s must be positive")
    for k, t in enumerate(layer_times_s):
        if t < min_layer_time_s:
            return (TOO_FAST, k)
    return (STABLE, None)


def shrink_compensate(mesh: Mesh, shrinkage: float) -> Mesh:
    """Pre-scale so the part returns to target size after uniform firing shrink."""
    if not (0 <= shrinkage < 1):
        raise StabilityError("shrinkage must be in [0, 1)")
    if shrinkage == 0:
        return mesh
    center = (mesh.bbox[0] + mesh.bbox[1]) / 2
    return mesh.scaled_about(1.0 / (1.0 - shrinkage), center)


@dataclass
class StabilityReport:
    verdict: str
    verdict_layer: int | None
    layers: list[dict]

    def to_json(self) -> str:
        return json.dumps(
            {
                "verdict": self.verdict,
                "verdict_layer": self.verdict_layer,
                "layers": self.layers,
            }
        )

    def to_table(self) -> str:
        lines = [
            f"{'layer':>5} {'mass kg':>10} {'com x':>10} {'com y':>10} {'com z':>10} "
            f"{'margin mm':>10} {'stress Pa':>12}"
        ]
        for row in self.layers:
            lines.append(
                f"{row['layer']:>5} {row['cumulative_mass_kg']:>10.4f} "
                f"{row['com'][0]:>10.3f} {row['com'][1]:>10.3f} {row['com'][2]:>10.3f} "
                f"{row['support_margin_mm']:>10.3f} {row['stress_pa']:>12.2f}"
            )
        tail = self.verdict
        if self.verdict_layer is not None:
            tail += f" (layer {self.verdict_layer})"
        lines.append(f"verdict: {tail}")
        return "\n".join(lines)


def analyze(
    toolpath: Toolpath,
    base_layer: Layer,
    bead_area_mm2: float,
    mix: MaterialMix,
    layer_times_s: list[float],
    margin_mm: float = 0.0,
    min_layer_time_s: float | None = None,
) -> StabilityReport:
    series = cumulative_com(toolpath, bead_area_mm2, mix)
    support_verdict, margins = support_check(series, base_layer, margin_mm)
    load_verdict, stresses = load_check(toolpath, bead_area_mm2, mix, layer_times_s)
    gate_verdict = (
        drying_gate(layer_times_s, min_layer_time_s)
        if min_layer_time_s is not None and layer_times_s
        else (STABLE, None)
    )
    failures = [v for v in (support_verdict, load_verdict, gate_verdict) if v[0] != STABLE]
    if failures:
        verdict, layer = min(failures, key=lambda v: v[1])
    else:
        verdict, layer = STABLE, None
    rows = [
        {
            "layer": entry.layer_index,
            "cumulative_mass_kg": entry.cumulative_mass_kg,
            "com": list(entry.com),
            "support_margin_mm": margins[i],
            "stress_pa": stresses[i],
        }
        for i, entry in enumerate(series)
    ]
    return StabilityReport(verdict=verdict, verdict_layer=layer, layers=rows)
