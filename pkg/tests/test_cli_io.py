"""Configuration files, VTK output, and the command-line surface."""

import json

import numpy as np
import pytest

from dgviv import config as cfgmod
from dgviv import dg_core, mesh as meshmod, penalty as pen, physics as ph, refelem
from dgviv import vtk_io
from dgviv.cli import main


# -- config ------------------------------------------------------------------

def test_config_defaults_round_trip(tmp_path):
    cfg = cfgmod.SolverConfig()
    path = tmp_path / "c.json"
    cfgmod.save_config(cfg, path)
    cfg2 = cfgmod.load_config(path)
    assert cfg2 == cfg
    assert cfg2.schema_version == cfgmod.SCHEMA_VERSION


def test_config_unknown_top_level_key_rejected():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.SolverConfig.from_dict({"tyme": {}})


def test_config_unknown_section_key_rejected():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.SolverConfig.from_dict({"gas": {"gama": 1.4}})


def test_config_bad_schema_version_rejected():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.SolverConfig.from_dict({"schema_version": 99})


def test_config_theta_restricted():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.SolverConfig.from_dict({"discretization": {"theta": 0.5}})


def test_config_partial_override():
    cfg = cfgmod.SolverConfig.from_dict(
        {"discretization": {"p": 2}, "time": {"n_steps": 7}})
    assert cfg.discretization.p == 2
    assert cfg.time.n_steps == 7
    assert cfg.gas.gamma == 1.4  # untouched defaults survive


# -- VTK -----------------------------------------------------------------------

def make_ev(p=1):
    gas = ph.GasParams(mu=0.01)
    fs = ph.FreeStream(1.4, (0.2, 0.0), 1.0)
    m = meshmod.generate_structured(3, 3, rect=(0, 0, 1, 1))
    tab = refelem.build_tables(p)
    ev = dg_core.ResidualEvaluator(m, tab, gas, pen.PenaltyConfig(),
                                   freestream=fs)
    return ev, fs


def test_vtk_round_trip_p1(tmp_path):
    ev, fs = make_ev(p=1)
    u = ev.interpolate(lambda x, y, t=0.0: np.stack(
        [1.4 + 0.1 * x, 0.2 + 0 * x, 0.1 * y, 2.5 + 0.2 * x * 0], axis=-1))
    path = tmp_path / "out.vtk"
    vtk_io.write_vtk(ev, u, path)
    points, cells, data = vtk_io.read_vtk(path)
    assert points.shape[1] in (2, 3)
    assert cells.shape[1] == 3
    assert set(data) >= {"rho", "u", "v", "p", "vorticity"}
    # at p=1 the nodes are the triangle vertices: rho is recovered exactly
    rho = data["rho"]
    assert np.abs(rho - (1.4 + 0.1 * points[:, 0])).max() < 1e-12


def test_vtk_header_is_legacy_ascii(tmp_path):
    ev, fs = make_ev(p=1)
    u = np.broadcast_to(fs.conservative(ev.gas),
                        (ev.mesh.n_elements, ev.tables.n_p, 4)).copy()
    path = tmp_path / "o.vtk"
    vtk_io.write_vtk(ev, u, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile Version")
    assert "ASCII" in lines[2]
    assert any(line.startswith("DATASET UNSTRUCTURED_GRID") for line in lines)


def test_vtk_subcell_count(tmp_path):
    ev, fs = make_ev(p=3)
    u = np.broadcast_to(fs.conservative(ev.gas),
                        (ev.mesh.n_elements, ev.tables.n_p, 4)).copy()
    path = tmp_path / "o3.vtk"
    vtk_io.write_vtk(ev, u, path)
    _, cells, _ = vtk_io.read_vtk(path)
    assert len(cells) == ev.mesh.n_elements * 9  # p^2 subcells per element


# -- CLI ------------------------------------------------------------------------

def write_cfg(tmp_path, **over):
    data = {
        "discretization": {"p": 1},
        "time": {"n_steps": 3, "dt": 1e-3, "transient_skip": 0.0},
        "io": {"output_dir": str(tmp_path / "out")},
        "body": {"Re": 100.0},
    }
    for k, v in over.items():
        data.setdefault(k, {}).update(v)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data))
    return path


def test_cli_requires_config(capsys):
    with pytest.raises(SystemExit):
        main(["cylinder"])


def test_cli_penalty_report(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["penalty-report", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    text = (out / "penalty_sigma.csv").read_text().splitlines()
    assert text[0] == "face,sigma"
    assert (out / "penalty_sigma.png").exists()
    summary = json.loads((out / "penalty_summary.json").read_text())
    assert summary["sigma_max"] > 0


def test_cli_cfl_report(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["cfl-report", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    text = (out / "cfl_elements.csv").read_text().splitlines()
    assert text[0] == "element,lambda,lambda_tilde"
    assert (out / "cfl_lambda.png").exists()
    summary = json.loads((out / "cfl_summary.json").read_text())
    assert summary["dt"] > 0
    assert 0.1 < summary["Lambda_tilde"] / summary["Lambda"] < 10


def test_cli_cylinder_short_run(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["cylinder", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    series = (out / "cylinder_series.csv").read_text().splitlines()
    assert series[0] == "t,CL,CD,y,ydot,dt"
    assert len(series) == 4
    assert (out / "cylinder_series.png").exists()
    assert (out / "cylinder_summary.json").exists()
    assert (out / "cylinder_final.vtk").exists()


def test_cli_dt_override(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["cylinder", "--config", str(cfg), "--dt", "5e-4"]) == 0
    series = (tmp_path / "out" / "cylinder_series.csv").read_text().splitlines()
    assert series[1].split(",")[5] == repr(5e-4)


def test_cli_threads_bitwise(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    cfg1 = write_cfg(tmp_path / "a")
    cfg2 = write_cfg(tmp_path / "b")
    assert main(["cylinder", "--config", str(cfg1), "--threads", "1"]) == 0
    assert main(["cylinder", "--config", str(cfg2), "--threads", "3"]) == 0
    text1 = (tmp_path / "a" / "out" / "cylinder_series.csv").read_text()
    text2 = (tmp_path / "b" / "out" / "cylinder_series.csv").read_text()
    assert text1 == text2


def test_cli_viv_short_run(tmp_path):
    cfg = write_cfg(tmp_path, viv={"U_star": 5.0, "m_star": 2.0})
    assert main(["viv", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "viv_series.csv").exists()
    assert (out / "viv_summary.json").exists()


def test_cli_convergence_smallest(tmp_path):
    cfg = write_cfg(
        tmp_path,
        manufactured={"orders": [1], "refinements": [2, 4], "max_iters": 40},
        gas={"mu": 0.01},
    )
    assert main(["convergence", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    csvs = sorted(out.glob("convergence_*.csv"))
    assert csvs
    header = csvs[0].read_text().splitlines()[0]
    assert header == "p,h,L2,Linf"
    assert list(out.glob("convergence_*.png"))
    assert (out / "convergence_summary.json").exists()


def test_cli_external_mesh(tmp_path):
    m = meshmod.generate_cylinder_ogrid(n_theta=12, n_r=2, r_wall=0.5, r_far=3.0)
    mpath = tmp_path / "small.msh"
    meshmod.save_msh(m, mpath)
    cfg = write_cfg(tmp_path, io={"mesh": str(mpath),
                                  "output_dir": str(tmp_path / "out")})
    assert main(["cylinder", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "cylinder_series.csv").exists()
