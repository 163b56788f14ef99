import json

import numpy as np
import pytest

import radgraph.cli as cli
from radgraph import ContinuationReport, snapshot
from radgraph.errors import ConfigError, ContinuationStalled, InvalidField
from radgraph.io import (
    RunConfig,
    dumps17,
    load_config,
    mesh_faces,
    read_field_for_grid,
    read_solution_csv,
    write_solution_csv,
)

from conftest import annulus, ball, cap_solve

UNIT = {
    "domain": {"kind": "ball", "radius": float(np.pi / 3)},
    "psi": {"kind": "constant", "c": 1.0},
    "curvature": "sigma_k_root:n=2,k=2",
    "resolution": 17,
    "boundary_rho": 1.0,
    "subsolution": {"kind": "cap", "multiplier": 1.15},
}


def write_config(tmp_path, name="config.json", **changes):
    cfg = dict(UNIT, output=str(tmp_path / "out"), **changes)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("unit")
    path = write_config(tmp)
    code = cli.main(["solve", str(path)])
    return code, path, tmp / "out"


# solve


def test_solve_unit_sphere(solved):
    code, _, out = solved
    assert code == cli.EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["all_pass"] is True and report["status"] == "solved"
    assert report["certificate"]["all_pass"] is True
    assert {"stage1", "stage2", "probe", "epsilon", "K", "grid_hash"} <= set(report)
    assert report["stage2"]["steps"][-1]["t"] == 1.0
    for name in ("solution.csv", "surface.obj", "config.json"):
        assert (out / name).exists()


def test_verify_round_trip(solved, capsys):
    _, path, out = solved
    assert cli.main(["verify", str(out / "solution.csv"), str(path)]) == cli.EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["all_pass"] is True and printed["flags"]["stored_fields_consistent"]


def test_verify_tampered(solved, tmp_path):
    _, path, out = solved
    lines = (out / "solution.csv").read_text().splitlines()
    header = lines[1].split(",")
    row = lines[2 + 40].split(",")
    j = header.index("v")
    row[j] = format(float(row[j]) + 1e-3, ".17g")
    lines[2 + 40] = ",".join(row)
    bad = tmp_path / "tampered.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert cli.main(["verify", str(bad), str(path)]) == cli.EXIT_CERT


def test_verify_wrong_grid(solved):
    _, path, out = solved
    assert cli.main(["verify", str(out / "solution.csv"), str(path), "--resolution", "33"]) == cli.EXIT_CONFIG


def test_solve_no_subsolution(tmp_path, capsys):
    path = write_config(tmp_path, psi={"kind": "constant", "c": 1e6})
    assert cli.main(["solve", str(path)]) == cli.EXIT_NO_SUB
    assert "no subsolution" in capsys.readouterr().err
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["status"] == "no_subsolution"


def test_solve_quotient_refused(tmp_path, capsys):
    path = write_config(tmp_path, curvature="quotient_root:n=2")
    assert cli.main(["solve", str(path)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "structure probe" in err and "growth_0_8" in err


@pytest.mark.parametrize(
    "changes",
    [
        {"bogus": 1},
        {"newton": {"tolerance": 1e-10}},
        {"subsolution": {"kind": "cap", "mu": 2}},
        {"psi": {"kind": "constant", "c": 1.0, "d": 2}},
        {"domain": {"kind": "ball", "radius": 3.5}},
        {"resolution": 4},
        {"boundary_rho": -1.0},
    ],
)
def test_solve_config_errors(tmp_path, changes):
    path = write_config(tmp_path, **changes)
    assert cli.main(["solve", str(path)]) == cli.EXIT_CONFIG


def test_solve_unreadable_config(tmp_path):
    assert cli.main(["solve", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["solve", str(tmp_path / "broken.json")]) == cli.EXIT_CONFIG


def test_solve_stalled(tmp_path, monkeypatch):
    def stall(*args, **kwargs):
        raise ContinuationStalled("stage 2 stalled after t = 0.3", last_t=0.3, report=ContinuationReport(2, 0.1, 1.2))

    monkeypatch.setattr(cli, "solve", stall)
    path = write_config(tmp_path)
    assert cli.main(["solve", str(path)]) == cli.EXIT_STALLED
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["status"] == "stalled" and report["last_t"] == 0.3


def test_solve_flag_overrides(tmp_path):
    path = write_config(tmp_path, resolution=9)
    out = tmp_path / "elsewhere"
    assert cli.main(["solve", str(path), "--out", str(out), "--resolution", "17", "--tol", "1e-11"]) == cli.EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["resolution"] == 17 and report["config"]["newton"]["tol"] == 1e-11


def test_solve_file_subsolution(solved, tmp_path):
    # the solution of psi = 1 is a (non-strict) subsolution for psi = 0.9
    _, _, out = solved
    path = write_config(
        tmp_path, psi={"kind": "constant", "c": 0.9}, subsolution={"kind": "file", "path": str(out / "solution.csv")}
    )
    assert cli.main(["solve", str(path)]) == cli.EXIT_OK


# probe-f


@pytest.mark.parametrize(
    "spec,code",
    [
        ("sigma_k_root:n=2,k=2", cli.EXIT_OK),
        ("quotient_root:n=2", cli.EXIT_PROBE),
        ("sigma_k_root:n=2,k=1", cli.EXIT_PROBE),
        ('{"kind": "sigma_k_root", "n": 3, "k": 3}', cli.EXIT_OK),
        ("nonsense", cli.EXIT_CONFIG),
        ("sigma_k_root:n=2,k=5", cli.EXIT_CONFIG),
    ],
)
def test_probe_exit_codes(spec, code, capsys):
    assert cli.main(["probe-f", spec, "--samples", "200"]) == code


def test_probe_reports(capsys):
    cli.main(["probe-f", "quotient_root:n=2", "--samples", "200"])
    rep = json.loads(capsys.readouterr().out)
    assert rep["growth_0_8"] is False and rep["monotone"] and rep["concave"]
    cli.main(["probe-f", "sigma_k_root:n=2,k=1", "--samples", "200"])
    rep = json.loads(capsys.readouterr().out)
    assert rep["zero_boundary"] is False
    assert rep["monotone"] and rep["concave"] and rep["growth_0_8"]


def test_bad_arguments():
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG
    assert cli.main(["solve"]) == cli.EXIT_CONFIG


# file formats


def test_json_17_digits():
    assert dumps17(0.1) == "0.10000000000000001"
    assert dumps17(1.0) == "1.0" and dumps17(3) == "3"
    assert dumps17({"a": [np.float64(2) / 3, True, None]}) == '{"a": [0.66666666666666663, true, null]}'
    assert dumps17(float("inf")) == '"inf"'
    x = np.random.default_rng(0).standard_normal(50)
    assert np.array_equal(json.loads(dumps17(list(x))), x)
    with pytest.raises(TypeError):
        dumps17(object())


def test_report_floats_have_17_digits(solved):
    _, _, out = solved
    text = (out / "report.json").read_text()
    eps = json.loads(text)["epsilon"]
    assert format(eps, ".17g") in text


def test_csv_round_trip(tmp_path):
    g, psi, sub, outcome = cap_solve(17, 0.5, 2.0)
    s = snapshot(g, outcome.v)
    res = np.random.default_rng(1).standard_normal(g.size) * 1e-12
    path = tmp_path / "sol.csv"
    write_solution_csv(path, g, s, res)
    ghash, cols = read_solution_csv(path)
    assert ghash == g.hash()
    assert list(cols) == ["node", "xi_1", "xi_2", "v", "u", "rho", "kappa_1", "kappa_2", "beta", "residual"]
    assert np.array_equal(cols["v"], s.v) and np.array_equal(cols["residual"], res)
    assert np.array_equal(np.column_stack([cols["kappa_1"], cols["kappa_2"]]), s.kappa)
    assert np.array_equal(read_field_for_grid(path, g), s.v)
    with pytest.raises(InvalidField):
        read_field_for_grid(path, ball(33))


def test_csv_errors(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("node,v\n0,1\n")
    with pytest.raises(InvalidField, match="grid hash"):
        read_solution_csv(p)
    p.write_text("# grid_hash=abc\nnode,v\n0,zz\n")
    with pytest.raises(InvalidField, match="non-numeric"):
        read_solution_csv(p)


def test_obj_mesh(solved):
    _, _, out = solved
    g = ball(17)
    text = (out / "surface.obj").read_text().splitlines()
    verts = [line for line in text if line.startswith("v ")]
    faces = [line for line in text if line.startswith("f ")]
    assert len(verts) == g.size
    idx = np.array([[int(i) for i in f.split()[1:]] for f in faces])
    assert idx.min() == 1 and idx.max() == g.size
    # every triangle of a polar ball: M around the pole, 2M per ring gap
    M, L = g.azimuth, g.levels
    assert len(faces) == M + 2 * M * (L - 2)
    X = np.array([[float(c) for c in v.split()[1:]] for v in verts])
    assert np.max(np.abs(np.linalg.norm(X, axis=1) - 1)) < 1e-12


def test_mesh_faces_annulus_and_line():
    g = annulus(9)
    faces = mesh_faces(g)
    assert faces.shape == (2 * g.azimuth * (g.levels - 1), 3)
    assert set(np.unique(faces)) == set(range(g.size))


def test_run_config_validation(tmp_path):
    cfg = RunConfig.from_dict(dict(UNIT))
    assert cfg.curvature_function().name.startswith("sigma")
    assert cfg.newton_settings(1e-12).tol == 1e-12
    for bad in ([1, 2], {"psi": UNIT["psi"]}, dict(UNIT, subsolution={"kind": "file"})):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(bad)
    with pytest.raises(ConfigError, match="unknown config keys"):
        RunConfig.from_dict(dict(UNIT, colour="red"))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(UNIT))
    assert load_config(path).as_dict()["resolution"] == 17
