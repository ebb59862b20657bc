"""Command-line pipeline driver.

Every subcommand is a pure function of its flags and input files:
machine-readable output goes to stdout (or --out), human summaries to
stderr.  Exit codes: 0 ok, 1 usage error, 2 input error, 3 analysis
verdict unstable under --strict.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from . import lsys, motion, printsim, stability, weave
from .geom import load_mesh, slice_mesh
from .geom.mesh import MeshError, write_stl_binary
from .geom.paths import infill_region, seam_start_index, spiralize
from .geom.slicing import Contour, Layer
from .toolpath import EXTRUDE, Segment, Toolpath

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_UNSTABLE = 3

log = logging.getLogger("claypath")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _setup_logging():
    level = os.environ.get("LOADPATH_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr)


def _read(path: str, binary: bool = False):
    try:
        with open(path, "rb" if binary else "r") as f:
            return f.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}")


def _write_out(content, out: str | None, binary: bool = False):
    if out:
        with open(out, "wb" if binary else "w") as f:
            f.write(content)
    elif binary:
        sys.stdout.buffer.write(content)
    else:
        sys.stdout.write(content if content.endswith("\n") else content + "\n")


def _load_mesh_file(path: str):
    fmt = None
    lower = path.lower()
    if lower.endswith(".obj"):
        fmt = "obj"
    try:
        return load_mesh(_read(path, binary=True), fmt)
    except MeshError as e:
        raise InputError(str(e))


def layers_to_toolpath(layers, layer_height, shell=None, spacing=None, pattern="zigzag"):
    """Perimeter loops (plus optional shell-bounded infill) per layer."""
    segments = []
    prev_end = None
    for layer in layers:
        polylines = []
        for contour in layer.contours:
            verts = contour.vertices
            start = seam_start_index(verts, prev_end)
            ring = verts[start:] + verts[:start]
            pts = [(x, y, layer.z) for x, y in ring]
            pts.append(pts[0])
            polylines.append(pts)
            prev_end = pts[-1]
        if shell is not None:
            for pl in infill_region(layer, shell, spacing, pattern):
                polylines.append([tuple(p) for p in pl])
                prev_end = polylines[-1][-1]
        for pl in polylines:
            segments.append(Segment(points=pl, kind=EXTRUDE, layer_index=layer.index))
    tp = Toolpath(segments=segments, layer_height=layer_height)
    tp.validate()
    return tp


def base_layer_from_toolpath(tp: Toolpath) -> Layer:
    """Convex hull of the first layer's extrusion, as the support base."""
    first = min(s.layer_index for s in tp.segments if s.kind == EXTRUDE)
    pts = [
        (p[0], p[1])
        for s in tp.segments
        if s.kind == EXTRUDE and s.layer_index == first
        for p in s.points
    ]
    from shapely.geometry import MultiPoint

    hull = MultiPoint(pts).convex_hull
    if hull.geom_type != "Polygon":
        raise InputError("base layer extrusion is degenerate (no area)")
    verts = list(hull.exterior.coords)[:-1]
    z = next(p[2] for s in tp.segments if s.kind == EXTRUDE for p in s.points)
    contour = Contour(vertices=[tuple(v) for v in verts], z=z, orientation="outer")
    return Layer(index=0, z=z, contours=[contour])


# -- subcommands ---------------------------------------------------------


def cmd_slice(args):
    mesh = _load_mesh_file(args.mesh)
    try:
        layers = slice_mesh(mesh, args.layer_height)
    except ValueError as e:
        raise InputError(str(e))
    if not layers:
        raise InputError("mesh produced no layers")
    if args.spiral:
        tp = spiralize(layers)
        tp.layer_height = args.layer_height
    else:
        tp = layers_to_toolpath(
            layers,
            args.layer_height,
            shell=args.shell,
            spacing=args.infill_spacing,
            pattern=args.pattern,
        )
    print(f"{len(layers)} layers, extrude length {tp.extrude_length:.1f} mm", file=sys.stderr)
    _write_out(tp.to_json(), args.out)
    return EXIT_OK


def cmd_lsys(args):
    grammar = lsys.parse_grammar(_read(args.grammar))
    config = lsys.TurtleConfig.for_grammar(grammar)
    try:
        generations = [int(g) for g in args.generations.split(",")]
    except ValueError:
        raise InputError(f"bad generations list {args.generations!r}")
    tp = lsys.stack_generations(grammar, generations, config, args.z_step)
    print(f"{len(generations)} generations, extrude length {tp.extrude_length:.1f} mm", file=sys.stderr)
    _write_out(tp.to_json(), args.out)
    return EXIT_OK


def cmd_weave(args):
    try:
        spec = weave.WeaveSpec.from_dict(json.loads(_read(args.spec)))
    except (KeyError, ValueError) as e:
        raise InputError(f"bad weave spec: {e}")
    tp = weave.twist(spec, args.rotation)
    print(f"{spec.layers} layers, extrude length {tp.extrude_length:.1f} mm", file=sys.stderr)
    _write_out(tp.to_json(), args.out)
    return EXIT_OK


def cmd_plan(args):
    tp = Toolpath.from_json(_read(args.toolpath))
    params = motion.CompileParams(
        extrude_speed=args.extrude_speed,
        travel_speed=args.travel_speed,
        flow=args.flow,
        max_segment=args.max_segment,
        ext_lead_dwell=args.lead_dwell,
        travel_hop=args.hop,
    )
    program = motion.compile(tp, params)
    stats = motion.program_stats(program)
    print(
        f"{stats.move_count} moves, {stats.total_length / 1000:.1f} m, "
        f"{stats.duration:.0f} s",
        file=sys.stderr,
    )
    _write_out(motion.emit_cpl(program), args.out)
    return EXIT_OK


def cmd_stats(args):
    program = motion.parse_cpl(_read(args.program))
    stats = motion.program_stats(program)
    print(
        f"{stats.move_count} moves, {stats.total_length / 1000:.3f} m, "
        f"mean segment {stats.mean_segment:.2f} mm, mean speed {stats.mean_speed:.2f} mm/s",
        file=sys.stderr,
    )
    _write_out(json.dumps(stats.to_dict()), args.out)
    return EXIT_OK


def cmd_analyze(args):
    tp = Toolpath.from_json(_read(args.toolpath))
    mix = (
        stability.MaterialMix.from_json(_read(args.material))
        if args.material
        else stability.MaterialMix(clay_powder_kg=1.0)
    )
    base = base_layer_from_toolpath(tp)
    per_layer_len: dict[int, float] = {}
    for seg in tp.segments:
        if seg.kind == EXTRUDE:
            per_layer_len[seg.layer_index] = per_layer_len.get(seg.layer_index, 0.0) + seg.length
    layer_times = [per_layer_len[i] / args.extrude_speed for i in sorted(per_layer_len)]
    report = stability.analyze(
        tp,
        base,
        args.bead_area,
        mix,
        layer_times,
        margin_mm=args.margin,
        min_layer_time_s=args.min_layer_time,
    )
    print(report.to_table(), file=sys.stderr)
    _write_out(report.to_json(), args.out)
    if args.strict and report.verdict != stability.STABLE:
        return EXIT_UNSTABLE
    return EXIT_OK


def cmd_simulate(args):
    program = motion.parse_cpl(_read(args.program))
    pump = printsim.PumpModel(
        mode=args.pump_mode,
        flow_g_s=args.flow,
        start_latency_s=args.start_latency,
        stop_latency_s=args.stop_latency,
    )
    faults = printsim.FaultSpec(seed=args.seed)
    if args.faults:
        faults = printsim.FaultSpec.from_json(_read(args.faults))
        faults.seed = args.seed
    try:
        report = printsim.simulate(program, pump, faults, until=args.halt_at)
    except printsim.SimError as e:
        raise InputError(str(e))
    print(
        f"deposited {report.deposited_g:.1f} g, excess {report.excess_g:.1f} g, "
        f"deficit {report.deficit_g:.1f} g, {report.defect_count} defects",
        file=sys.stderr,
    )
    _write_out(report.to_json(), args.out)
    return EXIT_OK


def cmd_compensate(args):
    mesh = _load_mesh_file(args.mesh)
    try:
        scaled = stability.shrink_compensate(mesh, args.shrinkage)
    except stability.StabilityError as e:
        raise InputError(str(e))
    _write_out(write_stl_binary(scaled), args.out, binary=True)
    return EXIT_OK


def cmd_serve(args):
    from .streamd.service import serve

    program_text = _read(args.program)
    motion.parse_cpl(program_text)  # validate before going live
    serve(program_text, args.endpoint, args.listen, window=args.window, autostart=args.autostart)
    return EXIT_OK


def cmd_printer(args):
    import asyncio

    from .streamd.printer import run_printer

    host, port = args.listen.rsplit(":", 1)
    asyncio.run(run_printer(host, int(port), args.delay))
    return EXIT_OK


# -- argument wiring ------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="claypath", description="robotic clay printing pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("slice", help="mesh -> toolpath")
    s.add_argument("mesh")
    s.add_argument("--layer-height", type=float, required=True)
    s.add_argument("--shell", type=float, default=None, help="infill shell depth (mm)")
    s.add_argument("--infill-spacing", type=float, default=10.0)
    s.add_argument("--pattern", choices=["zigzag", "concentric"], default="zigzag")
    s.add_argument("--spiral", action="store_true", help="continuous vase-mode path")
    s.add_argument("--out")
    s.set_defaults(func=cmd_slice)

    s = sub.add_parser("lsys", help="grammar -> toolpath")
    s.add_argument("grammar")
    s.add_argument("--generations", required=True, help="comma-separated, one per layer")
    s.add_argument("--z-step", type=float, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_lsys)

    s = sub.add_parser("weave", help="weave spec -> toolpath")
    s.add_argument("spec")
    s.add_argument("--rotation", type=float, default=0.0, help="per-layer twist (deg)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_weave)

    s = sub.add_parser("plan", help="toolpath -> CPL program")
    s.add_argument("toolpath")
    s.add_argument("--extrude-speed", type=float, required=True)
    s.add_argument("--travel-speed", type=float, required=True)
    s.add_argument("--flow", type=float, required=True)
    s.add_argument("--max-segment", type=float, required=True)
    s.add_argument("--lead-dwell", type=float, default=0.5)
    s.add_argument("--hop", type=float, default=2.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("stats", help="CPL -> program statistics")
    s.add_argument("program")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("analyze", help="toolpath + material -> stability report")
    s.add_argument("toolpath")
    s.add_argument("--material", default=None, help="MaterialMix JSON file")
    s.add_argument("--bead-area", type=float, required=True, help="bead cross-section (mm^2)")
    s.add_argument("--margin", type=float, default=0.0)
    s.add_argument("--min-layer-time", type=float, default=None)
    s.add_argument("--extrude-speed", type=float, default=30.0)
    s.add_argument("--strict", action="store_true", help="exit 3 unless stable")
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="CPL -> virtual print report")
    s.add_argument("program")
    s.add_argument("--pump-mode", choices=[printsim.STOP_AND_GO, printsim.LEGACY_CONTINUOUS],
                   default=printsim.STOP_AND_GO)
    s.add_argument("--flow", type=float, default=2.0)
    s.add_argument("--start-latency", type=float, default=0.0)
    s.add_argument("--stop-latency", type=float, default=0.0)
    s.add_argument("--faults", default=None, help="FaultSpec JSON file")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--halt-at", type=float, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compensate", help="pre-scale mesh for firing shrinkage")
    s.add_argument("mesh")
    s.add_argument("--shrinkage", type=float, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_compensate)

    s = sub.add_parser("serve", help="stream a CPL program to a printer endpoint")
    s.add_argument("program")
    s.add_argument("--listen", required=True, help="operator websocket host:port")
    s.add_argument("--endpoint", required=True, help="printer TCP host:port")
    s.add_argument("--window", type=int, default=100)
    s.add_argument("--autostart", action="store_true")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("printer", help="run a virtual printer endpoint")
    s.add_argument("--listen", required=True, help="host:port")
    s.add_argument("--delay", type=float, default=0.0, help="seconds per command")
    s.set_defaults(func=cmd_printer)

    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (motion.MotionError, lsys.GrammarError, lsys.TurtleError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
