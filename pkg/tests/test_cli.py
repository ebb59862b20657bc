import json
import math

import pytest

from claypath.cli import main
from claypath.geom.mesh import load_mesh, write_stl_binary
from claypath.motion import parse_cpl, program_stats
from claypath.toolpath import EXTRUDE, Segment, Toolpath

from helpers import circle_contour_vertices, cube_mesh


@pytest.fixture
def cube_stl(tmp_path):
    path = tmp_path / "cube.stl"
    path.write_bytes(write_stl_binary(cube_mesh(40.0)))
    return str(path)


def run(*argv):
    return main(list(argv))


# -- slice ----------------------------------------------------------------


def test_slice_writes_toolpath(cube_stl, tmp_path, capsys):
    out = tmp_path / "tp.json"
    assert run("slice", cube_stl, "--layer-height", "5", "--out", str(out)) == 0
    tp = Toolpath.from_json(out.read_text())
    assert len({s.layer_index for s in tp.segments}) == 8  # 40 mm / 5 mm
    assert tp.extrude_length == pytest.approx(8 * 160.0, rel=0.01)
    assert "8 layers" in capsys.readouterr().err


def test_slice_byte_identical_reruns(cube_stl, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("slice", cube_stl, "--layer-height", "5", "--out", str(a))
    run("slice", cube_stl, "--layer-height", "5", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_slice_spiral(cube_stl, tmp_path):
    out = tmp_path / "tp.json"
    assert run("slice", cube_stl, "--layer-height", "5", "--spiral", "--out", str(out)) == 0
    tp = Toolpath.from_json(out.read_text())
    assert len(tp.segments) == 1
    zs = [p[2] for p in tp.segments[0].points]
    assert zs == sorted(zs)


def test_slice_with_infill(cube_stl, tmp_path):
    plain, filled = tmp_path / "p.json", tmp_path / "f.json"
    run("slice", cube_stl, "--layer-height", "5", "--out", str(plain))
    run(
        "slice", cube_stl, "--layer-height", "5",
        "--shell", "50", "--infill-spacing", "8", "--out", str(filled),
    )
    lp = Toolpath.from_json(plain.read_text()).extrude_length
    lf = Toolpath.from_json(filled.read_text()).extrude_length
    assert lf > lp


# -- lsys / weave ----------------------------------------------------------


def test_lsys_command(tmp_path):
    grammar = tmp_path / "koch.lsys"
    grammar.write_text("axiom F+F+F+F\nrule F -> F+F-F-F+F\nangle 90\nstep 10\n")
    out = tmp_path / "tp.json"
    assert run("lsys", str(grammar), "--generations", "0,1", "--z-step", "4", "--out", str(out)) == 0
    tp = Toolpath.from_json(out.read_text())
    # generation 0 draws 40 mm, generation 1 draws 200 mm
    assert tp.extrude_length == pytest.approx(240.0, abs=1e-6)


def test_lsys_bad_generations(tmp_path):
    grammar = tmp_path / "g.lsys"
    grammar.write_text("axiom F\n")
    assert run("lsys", str(grammar), "--generations", "one,two", "--z-step", "4") == 2


def test_weave_command(tmp_path):
    spec = tmp_path / "weave.json"
    spec.write_text(
        json.dumps(
            {
                "ring_points": 6,
                "stride": 2,
                "layers": 3,
                "layer_height": 5.0,
                "base_curve": {"center": [0.0, 0.0], "radius": 40.0},
            }
        )
    )
    out = tmp_path / "tp.json"
    assert run("weave", str(spec), "--rotation", "15", "--out", str(out)) == 0
    tp = Toolpath.from_json(out.read_text())
    assert len(tp.extrude_segments()) == 3 * math.gcd(6, 2)


# -- plan / stats -----------------------------------------------------------


def planned(cube_stl, tmp_path):
    tp_path = tmp_path / "tp.json"
    cpl_path = tmp_path / "prog.cpl"
    run("slice", cube_stl, "--layer-height", "5", "--out", str(tp_path))
    code = run(
        "plan", str(tp_path),
        "--extrude-speed", "30", "--travel-speed", "60", "--flow", "2",
        "--max-segment", "12", "--out", str(cpl_path),
    )
    assert code == 0
    return tp_path, cpl_path


def test_plan_emits_valid_cpl(cube_stl, tmp_path):
    tp_path, cpl_path = planned(cube_stl, tmp_path)
    program = parse_cpl(cpl_path.read_text())
    assert program.commands


def test_plan_stats_extrude_length_agreement(cube_stl, tmp_path):
    tp_path, cpl_path = planned(cube_stl, tmp_path)
    tp = Toolpath.from_json(tp_path.read_text())
    stats = program_stats(parse_cpl(cpl_path.read_text()))
    assert stats.extrude_length == pytest.approx(tp.extrude_length, abs=1e-3)


def test_stats_command(cube_stl, tmp_path, capsys):
    _, cpl_path = planned(cube_stl, tmp_path)
    out = tmp_path / "stats.json"
    assert run("stats", str(cpl_path), "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["move_count"] > 0
    assert doc["mean_segment_mm"] == pytest.approx(doc["total_length_mm"] / doc["move_count"])
    assert "mean segment" in capsys.readouterr().err


def test_plan_byte_identical_reruns(cube_stl, tmp_path):
    tp_path, cpl_path = planned(cube_stl, tmp_path)
    again = tmp_path / "again.cpl"
    run(
        "plan", str(tp_path),
        "--extrude-speed", "30", "--travel-speed", "60", "--flow", "2",
        "--max-segment", "12", "--out", str(again),
    )
    assert again.read_bytes() == cpl_path.read_bytes()


# -- analyze -----------------------------------------------------------------


def ring_toolpath_json(offsets, radius=40.0):
    segs = []
    for k, dx in enumerate(offsets):
        pts = [(x + dx, y, (k + 0.5) * 5.0) for x, y in circle_contour_vertices(radius, 64)]
        pts.append(pts[0])
        segs.append(Segment(points=pts, kind=EXTRUDE, layer_index=k))
    return Toolpath(segments=segs, layer_height=5.0).to_json()


def test_analyze_stable(tmp_path):
    tp_path = tmp_path / "tp.json"
    tp_path.write_text(ring_toolpath_json([0.0] * 6))
    out = tmp_path / "report.json"
    code = run("analyze", str(tp_path), "--bead-area", "40", "--strict", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["verdict"] == "stable"


def test_analyze_strict_unstable_exit_3(tmp_path, capsys):
    tp_path = tmp_path / "tp.json"
    tp_path.write_text(ring_toolpath_json([12.0 * k for k in range(10)]))
    code = run("analyze", str(tp_path), "--bead-area", "40", "--strict")
    assert code == 3
    assert "tipping" in capsys.readouterr().err


def test_analyze_unstable_without_strict_exit_0(tmp_path):
    tp_path = tmp_path / "tp.json"
    tp_path.write_text(ring_toolpath_json([12.0 * k for k in range(10)]))
    assert run("analyze", str(tp_path), "--bead-area", "40") == 0


# -- simulate -----------------------------------------------------------------


def test_simulate_legacy_excess(tmp_path):
    cpl = tmp_path / "prog.cpl"
    cpl.write_text(
        "EXT ON 2.000000\n"
        "MOVE 100.000000 0.000000 0.000000 25.000000 E\n"
        "EXT OFF\n"
        "DWELL 20.000000\n"
    )
    out = tmp_path / "report.json"
    assert run("simulate", str(cpl), "--pump-mode", "legacy_continuous", "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["excess_g"] == pytest.approx(40.0)
    assert run("simulate", str(cpl), "--out", str(out)) == 0
    assert json.loads(out.read_text())["excess_g"] == 0.0


def test_simulate_with_faults_file(tmp_path):
    cpl = tmp_path / "prog.cpl"
    cpl.write_text("EXT ON 2.000000\nMOVE 100.000000 0.000000 0.000000 25.000000 E\nEXT OFF\n")
    faults = tmp_path / "faults.json"
    faults.write_text(
        json.dumps({"flow_disruption": [{"start_s": 1, "end_s": 3, "flow_multiplier": 0.5}]})
    )
    out = tmp_path / "report.json"
    assert run("simulate", str(cpl), "--faults", str(faults), "--out", str(out)) == 0
    assert json.loads(out.read_text())["deficit_g"] == pytest.approx(2.0)


def test_simulate_halt_outside_program_is_input_error(tmp_path):
    cpl = tmp_path / "prog.cpl"
    cpl.write_text("EXT ON 2.000000\nMOVE 100.000000 0.000000 0.000000 25.000000 E\nEXT OFF\n")
    assert run("simulate", str(cpl), "--halt-at", "1000") == 2


# -- compensate ----------------------------------------------------------------


def test_compensate_scales_mesh(cube_stl, tmp_path):
    out = tmp_path / "scaled.stl"
    assert run("compensate", cube_stl, "--shrinkage", "0.12", "--out", str(out)) == 0
    mesh = load_mesh(out.read_bytes())
    size = mesh.bbox[1][0] - mesh.bbox[0][0]
    assert size == pytest.approx(40.0 / 0.88, rel=1e-6)


def test_compensate_bad_shrinkage(cube_stl):
    assert run("compensate", cube_stl, "--shrinkage", "1.5") == 2


# -- exit codes ----------------------------------------------------------------


def test_usage_errors_exit_1(capsys):
    assert run() == 1
    assert run("slice") == 1  # missing mesh and --layer-height
    assert run("frobnicate") == 1
    assert run("stats", "x.cpl", "--bogus-flag") == 1
    capsys.readouterr()


def test_missing_file_exit_2(tmp_path, capsys):
    assert run("stats", str(tmp_path / "nope.cpl")) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_inputs_exit_2(tmp_path, capsys):
    bad_tp = tmp_path / "bad.json"
    bad_tp.write_text("{not json")
    assert run("analyze", str(bad_tp), "--bead-area", "40") == 2
    bad_cpl = tmp_path / "bad.cpl"
    bad_cpl.write_text("MOVE 1 2\n")
    assert run("stats", str(bad_cpl)) == 2
    capsys.readouterr()
