import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from fe2hom import cli
from fe2hom.config import build_config, parse_config
from fe2hom.errors import ConfigError, SolverError
from fe2hom.fem import Material
from fe2hom.io import read_tangent_csv, write_tangent_csv, write_vtk
from fe2hom.mesh import gen_grid
from fe2hom.rve import RveModel, macro_tangent

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_cfg(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def load(name):
    return yaml.safe_load((CONFIGS / name).read_text())


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write_cfg(tmp_path, {"mode": "rve-tangent", "materials": {0: {"E": 1.0, "nu": 0.3}}}))
    assert cfg.tol == 1e-8
    assert cfg.fsi.gamma == 1e-3
    assert cfg.rve.quadrature == 2
    assert cfg.rve.bc == "affine"


def test_missing_material_names_key(tmp_path):
    raw = {"mode": "rve-tangent", "rve": {"microstructure": {"kind": "laminate"}}, "materials": {0: {"E": 1.0, "nu": 0.3}}}
    with pytest.raises(ConfigError) as info:
        parse_config(write_cfg(tmp_path, raw))
    assert "materials[1]" in str(info.value)


def test_errors_are_aggregated():
    with pytest.raises(ConfigError) as info:
        build_config({"mode": "rve-tangent", "rve": {"nx": 0, "bc": "clamped"}, "materials": {0: {"E": -1, "nu": 0.3}}})
    msg = str(info.value)
    assert "rve.nx" in msg and "rve.bc" in msg and "materials[0]" in msg
    with pytest.raises(ConfigError, match="mode"):
        build_config({"mode": "fe3-run"})


def test_four_step_program_echo():
    cfg = build_config(load("fe2_uniaxial.yaml"))
    assert len(cfg.macro.load_program) == 4


def test_explicit_load_program():
    raw = load("fe2_uniaxial.yaml")
    del raw["macro"]["steps"], raw["macro"]["increment"]
    raw["macro"]["load_program"] = [
        {"traction": {"right": [0.001, 0.0]}},
        {"displacement": [{"edge": "top", "component": 1, "value": 0.001}]},
    ]
    cfg = build_config(raw)
    assert len(cfg.macro.load_program) == 2
    assert cfg.macro.load_program[1].displacement[0].where == "top"


@pytest.mark.parametrize(
    "mode, config, files",
    [
        ("rve-tangent", "rve_tangent_homogeneous.yaml", ["tangent.csv", "rve_mesh.txt"]),
        ("rve-tangent", "rve_tangent_laminate.yaml", ["tangent.csv"]),
        ("rve-stress", "rve_stress_void.yaml", ["stress.csv", "rve.vtk"]),
        ("fe2-run", "fe2_uniaxial.yaml", ["log.csv", "step_004.vtk", "displacements.csv"]),
        ("fsi-rve", "fsi_fluid_core.yaml", ["biphasic_stress.csv", "coupled_tangent.csv", "fsi.vtk"]),
        ("fd-check", "fd_check_laminate.yaml", ["fd_check.txt"]),
    ],
)
def test_shipped_configs_run(tmp_path, mode, config, files):
    out = tmp_path / "out"
    assert cli.main([mode, "--config", str(CONFIGS / config), "--out", str(out)]) == 0
    for f in files:
        assert (out / f).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["mode"] == mode
    assert len(manifest["config_hash"]) == 64
    assert set(files) <= set(manifest["files"])


def test_tangent_csv_has_sixteen_entries(tmp_path):
    assert cli.main(["rve-tangent", "--config", str(CONFIGS / "rve_tangent_homogeneous.yaml"), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "tangent.csv").read_text().splitlines()
    assert lines[0] == "a,b,c,d,value"
    assert len(lines) == 17
    C = read_tangent_csv(tmp_path / "tangent.csv")
    np.testing.assert_array_equal(C, macro_tangent(RveModel(gen_grid(8, 8), {0: Material(1.0, 0.3)})))


def test_fd_check_single_line(tmp_path, capsys):
    assert cli.main(["fd-check", "--config", str(CONFIGS / "fd_check_laminate.yaml"), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "fd_check.txt").read_text()
    assert text.count("\n") == 1 and "max relative discrepancy" in text
    value = float(text.split("discrepancy ")[1].split()[0])
    assert value <= 1e-6


def test_zero_load_fe2(tmp_path):
    raw = load("fe2_uniaxial.yaml")
    raw["macro"]["steps"] = 1
    raw["macro"]["increment"] = {"traction": {"right": [0.0, 0.0]}}
    assert cli.main(["fe2-run", "--config", str(write_cfg(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "step_001.vtk").exists()
    log = (tmp_path / "o" / "log.csv").read_text().splitlines()
    assert log[1].split(",")[:2] == ["1", "1"] and float(log[1].split(",")[2]) == 0.0


def test_determinism(tmp_path):
    for mode, name in (("rve-tangent", "rve_tangent_laminate.yaml"), ("fe2-run", "fe2_uniaxial.yaml"), ("fsi-rve", "fsi_fluid_core.yaml")):
        a, b = tmp_path / f"{mode}-a", tmp_path / f"{mode}-b"
        assert cli.main([mode, "--config", str(CONFIGS / name), "--out", str(a)]) == 0
        assert cli.main([mode, "--config", str(CONFIGS / name), "--out", str(b), "--threads", "3"]) == 0
        for f in sorted(a.glob("*.csv")):
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_exit_code_config(tmp_path):
    bad = write_cfg(tmp_path, {"mode": "rve-tangent", "materials": {}})
    assert cli.main(["rve-tangent", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["rve-stress", "--config", str(CONFIGS / "rve_tangent_homogeneous.yaml"), "--out", str(tmp_path / "o")]) == 2


def test_exit_code_mesh_error(tmp_path):
    raw = {"mode": "rve-tangent", "rve": {"microstructure": {"kind": "inclusion", "center": [0.9, 0.5], "radius": 0.3}},
           "materials": {0: {"E": 1.0, "nu": 0.3}, 1: {"E": 2.0, "nu": 0.3}}}
    assert cli.main(["rve-tangent", "--config", str(write_cfg(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 2


def test_exit_code_nonconvergence(tmp_path):
    raw = load("fe2_uniaxial.yaml")
    raw["tol"] = 1e-300
    raw["max_iter"] = 2
    out = tmp_path / "o"
    assert cli.main(["fe2-run", "--config", str(write_cfg(tmp_path, raw)), "--out", str(out)]) == 3
    assert (out / "log.csv").exists()


def test_exit_code_solver_failure(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("numerically singular operator")

    monkeypatch.setattr(cli, "macro_tangent", broken)
    cfg = str(CONFIGS / "rve_tangent_homogeneous.yaml")
    assert cli.main(["rve-tangent", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_thread_precedence(tmp_path, monkeypatch):
    seen = []
    monkeypatch.setitem(cli.RUNNERS, "rve-tangent", lambda cfg, out: seen.append(cfg.threads) or [])
    cfg = str(CONFIGS / "rve_tangent_homogeneous.yaml")
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    cli.main(["rve-tangent", "--config", cfg, "--out", str(tmp_path)])
    cli.main(["rve-tangent", "--config", cfg, "--out", str(tmp_path), "--threads", "5"])
    monkeypatch.delenv(cli.THREADS_ENV)
    cli.main(["rve-tangent", "--config", cfg, "--out", str(tmp_path)])
    assert seen == [3, 5, 1]


def test_tangent_csv_round_trip(tmp_path):
    C = np.random.default_rng(0).standard_normal((2, 2, 2, 2))
    write_tangent_csv(C, tmp_path / "t.csv")
    np.testing.assert_array_equal(read_tangent_csv(tmp_path / "t.csv"), C)


def test_vtk_layout(tmp_path):
    m = gen_grid(2, 1)
    u = np.arange(12, dtype=float)
    p = np.full(6, np.nan)
    write_vtk(m, tmp_path / "m.vtk", "t", point_vectors={"u": u}, point_scalars={"p": p},
              cell_tensors={"P": np.zeros((2, 2, 2))})
    lines = (tmp_path / "m.vtk").read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "ASCII" in lines and "DATASET UNSTRUCTURED_GRID" in lines
    assert "POINTS 6 double" in lines[4]
    assert lines[lines.index("CELL_TYPES 2") + 1] == "9"
    assert "POINT_DATA 6" in lines and "CELL_DATA 2" in lines
