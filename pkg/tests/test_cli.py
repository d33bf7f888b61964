import json

import numpy as np
import pytest

from anisogeo.cli import main

SQ = '{"type": "polytope", "vertices": [[0,0],[1,0],[1,1],[0,1]]}'
DISC = '{"type": "ball", "radius": 1.0, "n": 2}'
BALL3 = '{"type": "ball", "radius": 1.0, "n": 3}'


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_dist_smoke(capsys):
    code, out, _ = run(capsys, [
        "dist", "--body", SQ, "--gauge", DISC,
        "--points", "[[2.0, 0.5], [0.5, 0.5]]"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x,d,p,y,u"
    assert len(lines) == 3
    assert "1.0" in lines[1]
    # interior point: d = 0, empty normal fields
    assert ",0.0," in lines[2] and "[]" in lines[2]


def test_measures_deterministic(tmp_path):
    args = ["measures", "--body", SQ, "--gauge", DISC, "--seed", "3",
            "--samples", "50000", "--cells", "16"]
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(f1)]) == 0
    assert main(args + ["--out", str(f2), "--workers", "2"]) == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_measures_json_out(tmp_path):
    f = tmp_path / "prof.json"
    code = main(["measures", "--body", SQ, "--gauge", DISC, "--seed", "1",
                 "--samples", "50000", "--cells", "16", "--out", str(f)])
    assert code == 0
    obj = json.loads(f.read_text())
    assert obj["n"] == 2 and obj["m_cells"] == 16
    assert abs(obj["totals"]["1"] - 4.0) < 0.3


def test_body_and_gauge_from_files(tmp_path, capsys):
    fb = tmp_path / "body.json"
    fg = tmp_path / "gauge.json"
    fb.write_text(SQ)
    fg.write_text(DISC)
    code, out, _ = run(capsys, ["dist", "--body", str(fb), "--gauge", str(fg),
                                "--points", "[[2.0, 0.5]]"])
    assert code == 0 and "1.0" in out


def test_mixedvol_smoke(capsys):
    code, out, _ = run(capsys, [
        "mixedvol", "--body", SQ, "--gauge", DISC, "--seed", "2",
        "--samples", "200000"])
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "j,V,stderr"
    V = [float(r.split(",")[1]) for r in rows[1:]]
    assert abs(V[0] - np.pi) < 0.1 and abs(V[1] - 2.0) < 0.1 \
        and abs(V[2] - 1.0) < 0.05


def test_supportmeasures_smoke(tmp_path):
    f = tmp_path / "sm.json"
    code = main(["supportmeasures", "--body", SQ, "--gauge", DISC,
                 "--seed", "4", "--samples", "50000", "--cells", "16",
                 "--spatial-grid", "2", "--out", str(f)])
    assert code == 0
    obj = json.loads(f.read_text())
    assert obj["grid"]["shape"] == [2, 2]
    assert obj["cells"]["m"] == 16
    masses = np.asarray(obj["masses"])
    assert masses.shape == (2, 4, 16)


def test_theorem_check_positive(capsys):
    body = '{"type": "ball", "center": [0, 0, 0], "radius": 1.0}'
    code, out, _ = run(capsys, [
        "theorem-check", "--body", body, "--gauge", BALL3, "--seed", "5",
        "--samples", "400000", "--k", "1", "--cells", "32"])
    assert code == 0
    obj = json.loads(out)
    assert obj["verdict"] == "proportional"
    assert obj["tangential"]["k_detected"] == 0


def test_theorem_check_negative(capsys):
    code, out, _ = run(capsys, [
        "theorem-check", "--body", SQ, "--gauge", DISC, "--seed", "5",
        "--samples", "400000", "--k", "0", "--cells", "32"])
    assert code == 0
    obj = json.loads(out)
    assert obj["verdict"] == "not_proportional"


def test_relgeo_smoke(capsys):
    ell = '{"type": "ellipsoid", "matrix": [[1.44, 0, 0], [0, 1, 0], [0, 0, 0.64]]}'
    code, out, _ = run(capsys, [
        "relgeo", "--body", ell, "--gauge", BALL3, "--cells", "32",
        "--quad-density", "16"])
    assert code == 0
    assert out.splitlines()[0].startswith("cell_id,u0,u1,u2,area,S0")


def test_oracle_polygon(capsys):
    code, out, _ = run(capsys, ["oracle", "--body", SQ])
    assert code == 0
    obj = json.loads(out)
    assert obj["area"] == 1.0 and obj["perimeter"] == 4.0
    assert abs(sum(obj["S0"]) - 2 * np.pi) < 1e-9


def test_oracle_cap_and_box(capsys):
    code, out, _ = run(capsys, [
        "oracle", "--body", '{"type": "cap", "L": 2.0}'])
    assert code == 0
    V = json.loads(out)["mixed_volumes"]
    assert abs(V[1] - 1.5 * np.pi) < 1e-9
    code, out, _ = run(capsys, [
        "oracle", "--body", '{"type": "box", "sides": [1, 1]}'])
    assert code == 0
    assert json.loads(out)["mixed_volumes"] == [np.pi, 2.0, 1.0]


def test_exit_code_spec_errors(capsys):
    # malformed JSON
    assert main(["dist", "--body", "{bad json", "--gauge", DISC,
                 "--points", "[[0,0]]"]) == 1
    # unknown body type
    assert main(["dist", "--body", '{"type": "torus"}', "--gauge", DISC,
                 "--points", "[[0,0]]"]) == 1
    # missing required argument (argparse error mapped to 1)
    assert main(["measures", "--body", SQ, "--gauge", DISC]) == 1
    # bad cell count in dimension 3
    ball_body = '{"type": "ball", "center": [0, 0, 0], "radius": 1.0}'
    assert main(["measures", "--body", ball_body, "--gauge", BALL3,
                 "--seed", "1", "--samples", "1000", "--cells", "7"]) == 1
    capsys.readouterr()


def test_exit_code_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 1
    capsys.readouterr()


def test_missing_seed_rejected(capsys):
    assert main(["measures", "--body", SQ, "--gauge", DISC,
                 "--samples", "1000"]) == 1
    capsys.readouterr()
