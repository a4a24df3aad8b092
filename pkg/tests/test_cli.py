import csv
import json
import os

import meshio
import numpy as np
import pytest

from ipmm import suites
from ipmm.cli import ConfigError, RunConfig, main, run, sweep, verify, write_interface_vtk, write_vtk
from ipmm.dmesh import build
from ipmm.sim import PHASES, SimConfig, Simulation

SHORT = dict(benchmark="star2d", dx=0.2, dt=2e-3, t_end=0.05)


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


# -- VTK --------------------------------------------------------------


def test_vtk_two_triangles(tmp_path):
    t = build([(0, 0), (1, 0), (1, 1), (0, 1)])
    for k, c in enumerate(t.cells()):
        t.data[c, 0] = 0.5 * k
    path = tmp_path / "two.vtk"
    write_vtk(t, path)
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 4.2"
    assert "POINTS 4 double" in text and "CELLS 2 8" in text and "CELL_TYPES 2" in text
    m = meshio.read(path)
    assert m.points.shape == (4, 3)
    assert len(m.cells_dict["triangle"]) == 2
    assert sorted(m.cell_data["u"][0].ravel().tolist()) == [0.0, 0.5]


def test_vtk_round_trip_and_byte_stable(tmp_path):
    s = Simulation(SimConfig(benchmark="star2d", dx=0.2, dt=2e-3))
    for _ in range(5):
        s.step()
    a, b = tmp_path / "a.vtk", tmp_path / "b.vtk"
    write_vtk(s.tri, a, s.g)
    write_vtk(s.tri, b, s.g)
    assert a.read_bytes() == b.read_bytes()
    m = meshio.read(a)
    verts = s.tri.vertices()
    xy = np.array([(s.tri.px[v], s.tri.py[v]) for v in verts])
    assert np.array_equal(m.points[:, :2], xy)
    assert len(m.cells_dict["triangle"]) == s.tri.n_cells
    phase = m.cell_data["phase"][0].ravel()
    flag = m.cell_data["is_interface_edge"][0].ravel()
    assert set(phase.tolist()) == {0, 1}
    # every interface edge borders two cells
    assert flag.sum() >= len(s.g)


def test_interface_polyline_count(tmp_path):
    s = Simulation(SimConfig(benchmark="star2d", dx=0.2, dt=2e-3))
    path = tmp_path / "iface.vtk"
    write_interface_vtk(s.g, path)
    m = meshio.read(path)
    assert len(m.points) == len(s.g)
    seg = m.cells_dict["line"]
    n = len(s.g)
    assert seg.tolist() == [[k, (k + 1) % n] for k in range(n)]
    xs, ys = s.g.polygon_xy()
    assert np.array_equal(m.points[:, 0], xs) and np.array_equal(m.points[:, 1], ys)


# -- configuration ----------------------------------------------------


@pytest.mark.parametrize("kw", [
    dict(benchmark="sphere"),
    dict(dx=0.0),
    dict(dt=-1e-3),
    dict(t_end=0.0),
    dict(snapshot_every=0),
    dict(method="spectral"),
    dict(method="fv"),
    dict(projection="nearest"),
    dict(validate="always"),
])
def test_run_config_rejects(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_run_config_defaults():
    c = RunConfig(benchmark="vortex2d")
    assert (c.dx, c.dt) == (0.02, 1e-4)
    c = RunConfig(benchmark="circadv", method="both")
    assert (c.dx, c.dt) == (0.5, 1e-4)


# -- run --------------------------------------------------------------


def test_deterministic_replay(tmp_path):
    for name in ("a", "b"):
        assert run(RunConfig(**SHORT, out=str(tmp_path / name), snapshot_every=10)) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    for k in (0, 10, 20):
        assert (tmp_path / "a" / f"snap_{k:06d}.vtk").read_bytes() == \
            (tmp_path / "b" / f"snap_{k:06d}.vtk").read_bytes()


def test_metrics_and_summary(tmp_path):
    out = tmp_path / "r"
    assert run(RunConfig(**SHORT, out=str(out), snapshot_every=10)) == 0
    rows = read_csv(out / "metrics.csv")
    assert len(rows) == 26
    ts = [float(r["t"]) for r in rows]
    assert ts == sorted(ts) and ts[0] == 0.0 and ts[-1] == pytest.approx(0.05)
    assert [int(r["step"]) for r in rows] == list(range(26))
    timings = read_csv(out / "timings.csv")
    assert len(timings) == 25
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] == "ok"
    for p in PHASES:
        col = sum(float(r[p]) for r in timings)
        assert s["ipmm-fv"]["timings_total"][p] == pytest.approx(col, abs=1e-9)
        assert all(float(r[p]) >= 0 for r in timings)
    assert s["ipmm-fv"]["steps"] == 25
    assert 0 < s["ipmm-fv"]["length_min"] <= s["ipmm-fv"]["length_max"]
    assert "deviation" in s["ipmm-fv"]


def test_snapshot_cadence(tmp_path):
    out = tmp_path / "r"
    run(RunConfig(**SHORT, out=str(out), snapshot_every=7))
    snaps = sorted(f for f in os.listdir(out) if f.startswith("snap_"))
    ifaces = sorted(f for f in os.listdir(out) if f.startswith("iface_"))
    assert snaps == [f"snap_{k:06d}.vtk" for k in (0, 7, 14, 21)]
    assert ifaces == [f"iface_{k:06d}.vtk" for k in (0, 7, 14, 21)]


def test_circadv_both_methods(tmp_path):
    out = tmp_path / "c"
    cfg = RunConfig(benchmark="circadv", dx=0.5, dt=1e-2, t_end=0.05, method="both",
                    out=str(out), snapshot_every=5)
    assert run(cfg) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["fv"]["steps"] == 5 and s["ipmm-fv"]["steps"] == 5
    assert s["fv"]["mass_final"] == pytest.approx(s["fv"]["mass_initial"], rel=1e-12)
    rows = read_csv(out / "metrics.csv")
    assert {r["method"] for r in rows} == {"ipmm-fv", "fv"}
    assert rows[-1]["l1"] != ""
    assert (out / "fv_snap_000005.vtk").exists()


def test_run_failure_exit_code(tmp_path):
    # one halving cannot rescue a step this large
    out = tmp_path / "bad"
    cfg = RunConfig(benchmark="vortex2d", dx=0.05, dt=2.0, t_end=4.0, out=str(out))
    assert run(cfg) == 1
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] != "ok"


def test_sweep_merges(tmp_path):
    base = dict(SHORT, out=str(tmp_path / "sw"), snapshot_every=100)
    assert sweep(base, [0.2, 0.25], workers=1) == 0
    rows = read_csv(tmp_path / "sw" / "sweep.csv")
    assert [float(r["dx"]) for r in rows] == [0.2, 0.25]
    merged = read_csv(tmp_path / "sw" / "metrics.csv")
    assert {r["dx"] for r in merged} == {"0.2", "0.25"}


# -- command line -----------------------------------------------------


def test_config_file_overridden_by_flags(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps(dict(SHORT, dt=1e-2, snapshot_every=3)))
    out = tmp_path / "o"
    assert main(["run", "--config", str(conf), "--dt", "5e-3", "--out", str(out), "--quiet"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["config"]["dt"] == 5e-3 and s["config"]["snapshot_every"] == 3
    assert s["ipmm-fv"]["steps"] == 10


def test_usage_errors(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"benchmark": "star2d", "colour": "red"}))
    assert main(["run", "--config", str(conf)]) == 2
    assert main(["run", "--benchmark", "star2d", "--dt", "-1"]) == 2
    with pytest.raises(SystemExit):
        main(["verify", "nothing"])


def test_verify_exit_codes(monkeypatch, capsys):
    assert verify("theorem", trials=200) == 0
    assert "0 violations" in capsys.readouterr().out
    monkeypatch.setattr(suites, "theorem_suite",
                        lambda trials, seed=0: {"trials": trials, "failures": 1, "skipped": 0})
    assert verify("theorem", trials=5) == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_suites_small():
    assert verify("delaunay", trials=5) == 0
    assert verify("conservation", trials=200) == 0
    assert verify("preservation", trials=30) == 0
