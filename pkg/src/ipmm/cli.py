"""Command line harness: ``ipmm run|sweep|verify``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import multiprocessing
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .dmesh import MeshError, Triangulation
from .iface import BoundaryConflict, Interface, interface_edge_mask
from .mmesh import MoveTooFar
from .sim import (
    PHASES,
    CFLError,
    SimConfig,
    Simulation,
    StaticFV,
    ValidationError,
    circle_deviation,
    generate_initial_mesh,
    make_benchmark,
)

BENCHMARKS = ("star2d", "vortex2d", "circadv")
METHODS = ("ipmm-fv", "fv", "both")
PROJECTIONS = ("average", "l2")
VALIDATE = ("off", "sparse", "every-step")
SUITES = ("delaunay", "preservation", "theorem", "conservation")

# benchmark -> (dx, dt)
DEFAULTS = {"star2d": (0.1, 2e-4), "vortex2d": (0.02, 1e-4), "circadv": (0.5, 1e-4)}

METRIC_COLUMNS = ("method", "step", "t", "cells", "interface_vertices", "length", "area",
                  "epsilon", "mass", "substeps", "removed", "reinserted", "refined",
                  "coarsened", "repairs", "l1")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    benchmark: str = "star2d"
    dx: float | None = None
    dt: float | None = None
    t_end: float | None = None
    method: str = "ipmm-fv"
    projection: str = "average"
    out: str = "out"
    snapshot_every: int = 100
    validate: str = "off"
    seed: int = 0

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}")
        dx0, dt0 = DEFAULTS[self.benchmark]
        self.dx = dx0 if self.dx is None else float(self.dx)
        self.dt = dt0 if self.dt is None else float(self.dt)
        if not self.dx > 0 or not self.dt > 0:
            raise ConfigError("dx and dt must be positive")
        if self.t_end is not None and not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if int(self.snapshot_every) < 1:
            raise ConfigError("snapshot interval must be at least 1")
        self.snapshot_every = int(self.snapshot_every)
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.method != "ipmm-fv" and self.benchmark != "circadv":
            raise ConfigError("the static FV method only applies to circadv")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"unknown projection {self.projection!r}")
        if self.validate not in VALIDATE:
            raise ConfigError(f"unknown validation mode {self.validate!r}")

    def sim_config(self) -> SimConfig:
        return SimConfig(benchmark=self.benchmark, dx=self.dx, dt=self.dt, t_end=self.t_end,
                         projection=self.projection, validate=self.validate, seed=self.seed)


# ----------------------------------------------------------------------
# VTK output


def _fmt(x: float) -> str:
    return repr(float(x))


def write_vtk(tri: Triangulation, path, g: Interface | None = None, u=None):
    """Legacy ASCII unstructured grid of the live cells.

    Cell data: ``u`` (first data component unless given), ``phase`` and
    ``is_interface_edge`` (1 if any edge of the cell is an interface edge).
    """
    slots, cells, _, _ = tri.arrays()
    verts = tri.vertices()
    index = {v: k for k, v in enumerate(verts)}
    uu = tri.data[slots, 0] if u is None else np.asarray(u, dtype=float)
    phase = [tri.cphase[s] for s in slots]
    if g is not None:
        iface = interface_edge_mask(tri, g, cells).any(axis=1).astype(int)
    else:
        iface = np.zeros(len(slots), dtype=int)
    n = len(slots)
    lines = ["# vtk DataFile Version 4.2", "ipmm mesh snapshot", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(verts)} double"]
    lines += [f"{_fmt(tri.px[v])} {_fmt(tri.py[v])} 0.0" for v in verts]
    lines.append(f"CELLS {n} {4 * n}")
    lines += [f"3 {index[a]} {index[b]} {index[c]}" for a, b, c in cells.tolist()]
    lines.append(f"CELL_TYPES {n}")
    lines += ["5"] * n
    lines += [f"CELL_DATA {n}", "SCALARS u double 1", "LOOKUP_TABLE default"]
    lines += [_fmt(x) for x in uu]
    lines += ["SCALARS phase int 1", "LOOKUP_TABLE default"]
    lines += [str(int(p)) for p in phase]
    lines += ["SCALARS is_interface_edge int 1", "LOOKUP_TABLE default"]
    lines += [str(int(x)) for x in iface]
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_interface_vtk(g: Interface, path):
    """Closed interface polyline as an unstructured grid of line cells."""
    xs, ys = g.polygon_xy()
    n = len(xs)
    lines = ["# vtk DataFile Version 4.2", "ipmm interface", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in zip(xs, ys)]
    lines.append(f"CELLS {n} {3 * n}")
    lines += [f"2 {k} {(k + 1) % n}" for k in range(n)]
    lines.append(f"CELL_TYPES {n}")
    lines += ["3"] * n
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# run


def _row(method, m=None, **kw):
    row = dict.fromkeys(METRIC_COLUMNS, "")
    row["method"] = method
    if m is not None:
        for k in METRIC_COLUMNS[1:-1]:
            row[k] = getattr(m, k)
    row.update(kw)
    return row


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _run_ipmm(cfg: RunConfig, out, log):
    sim = Simulation(cfg.sim_config())
    fv = cfg.benchmark == "circadv"
    has_exact = sim.bench.exact is not None
    rows, trows = [], []
    l1_0 = sim.l1_error() if has_exact else None
    l1q_0 = sim.l1_error(quadrature=True) if has_exact else None
    rows.append(_row("ipmm-fv", step=0, t=0.0, cells=sim.tri.n_cells,
                     interface_vertices=len(sim.g), length=float(np.sum(sim.g.edge_lengths())),
                     area=_area(sim.g),
                     epsilon=0.0, mass=sim.initial_mass, l1=l1_0 if l1_0 is not None else ""))
    write_vtk(sim.tri, os.path.join(out, "snap_%06d.vtk" % 0), sim.g)
    write_interface_vtk(sim.g, os.path.join(out, "iface_%06d.vtk" % 0))
    lengths = [rows[0]["length"]]
    while not sim.done():
        m = sim.step(fv=fv)
        snap = m.step % cfg.snapshot_every == 0 or sim.done()
        l1 = sim.l1_error() if has_exact and snap else ""
        rows.append(_row("ipmm-fv", m, l1=l1))
        trows.append({"method": "ipmm-fv", "step": m.step, **m.timings})
        lengths.append(m.length)
        if m.step % cfg.snapshot_every == 0:
            write_vtk(sim.tri, os.path.join(out, "snap_%06d.vtk" % m.step), sim.g)
            write_interface_vtk(sim.g, os.path.join(out, "iface_%06d.vtk" % m.step))
        if log and m.step % max(1, cfg.snapshot_every) == 0:
            print(f"step {m.step} t={m.t:.4f} cells={m.cells} iface={m.interface_vertices} "
                  f"length={m.length:.4f}", file=sys.stderr)
    totals = {p: float(sum(r[p] for r in trows)) for p in PHASES}
    steps = len(trows)
    summary = {
        "steps": steps,
        "t_final": sim.t,
        "cells_final": sim.tri.n_cells,
        "cells_mean": float(np.mean([r["cells"] for r in rows])),
        "interface_vertices_final": len(sim.g),
        "length_initial": lengths[0],
        "length_min": float(min(lengths)),
        "length_max": float(max(lengths)),
        "length_final": lengths[-1],
        "area_initial": rows[0]["area"],
        "area_final": _area(sim.g),
        "mass_initial": sim.initial_mass,
        "mass_final": sim._mass,
        "remesh_mass_drift_rel": sim.mass_drift / abs(sim.initial_mass) if sim.initial_mass else 0.0,
        "repairs": sim.g.repairs_total,
        "timings_total": totals,
        "timings_mean": {p: (v / steps if steps else 0.0) for p, v in totals.items()},
    }
    if sim.bench.center is not None:
        dmin, dmax, dmean = circle_deviation(sim.g, sim.bench.center, sim.bench.radius)
        summary["deviation"] = {"min": dmin, "max": dmax, "mean": dmean}
    if has_exact:
        summary["l1_initial"] = l1_0
        summary["l1_final"] = rows[-1]["l1"]
        summary["l1_quadrature_initial"] = l1q_0
        summary["l1_quadrature_final"] = sim.l1_error(quadrature=True)
    bad, far = sim.background_mismatches()
    summary["background_mismatches"] = len(bad)
    summary["background_far_cells"] = far
    return rows, trows, summary


def _area(g):
    from .geom import polygon_area

    xs, ys = g.polygon_xy()
    return float(polygon_area(xs, ys))


def _run_fv(cfg: RunConfig, out):
    bench = make_benchmark(cfg.benchmark, cfg.dx, cfg.t_end)
    fv = StaticFV(bench.box, cfg.dx, cfg.dt, bench.motion, bench.exact, cfg.seed)
    exact = bench.exact
    l1_0 = fv.l1_error_exact(bench.exact_cell_areas)
    l1q_0 = fv.l1_error(lambda X, Y: exact(0.0, X, Y))
    m0 = fv.mass()
    rows = [_row("fv", step=0, t=0.0, cells=len(fv.area), mass=m0, l1=l1_0)]
    trows = []
    nsteps = int(round(bench.t_end / cfg.dt))
    for k in range(1, nsteps + 1):
        t0 = time.perf_counter()
        fv.step()
        dt = time.perf_counter() - t0
        snap = k % cfg.snapshot_every == 0 or k == nsteps
        l1 = fv.l1_error_exact(bench.exact_cell_areas) if snap else ""
        rows.append(_row("fv", step=k, t=fv.t, cells=len(fv.area), mass=fv.mass(), l1=l1))
        trows.append({"method": "fv", "step": k, **dict.fromkeys(PHASES, 0.0), "fv": dt})
        if k % cfg.snapshot_every == 0:
            write_vtk(fv.tri_mesh, os.path.join(out, "fv_snap_%06d.vtk" % k), None, fv.u)
    total = float(sum(r["fv"] for r in trows))
    summary = {"steps": nsteps, "t_final": fv.t, "cells": len(fv.area), "cfl": fv.cfl,
               "l1_initial": l1_0, "l1_final": rows[-1]["l1"],
               "l1_quadrature_initial": l1q_0,
               "l1_quadrature_final": fv.l1_error(lambda X, Y: exact(fv.t, X, Y)),
               "mass_initial": m0,
               "mass_final": fv.mass(),
               "timings_total": {**dict.fromkeys(PHASES, 0.0), "fv": total},
               "timings_mean": {**dict.fromkeys(PHASES, 0.0), "fv": total / max(nsteps, 1)}}
    return rows, trows, summary


def run(cfg: RunConfig, log: bool = False) -> int:
    """Run one configuration, writing metrics, timings, snapshots and a summary."""
    os.makedirs(cfg.out, exist_ok=True)
    summary = {"config": dataclasses.asdict(cfg), "status": "ok"}
    rows, trows = [], []
    code = EXIT_OK
    try:
        if cfg.method in ("ipmm-fv", "both"):
            r, tr, s = _run_ipmm(cfg, cfg.out, log)
            rows += r
            trows += tr
            summary["ipmm-fv"] = s
        if cfg.method in ("fv", "both"):
            r, tr, s = _run_fv(cfg, cfg.out)
            rows += r
            trows += tr
            summary["fv"] = s
    except (BoundaryConflict, ValidationError, MoveTooFar, CFLError, MeshError) as e:
        summary["status"] = f"{type(e).__name__}: {e}"
        print(f"ipmm: {summary['status']}", file=sys.stderr)
        code = EXIT_FAIL
    _write_csv(os.path.join(cfg.out, "metrics.csv"), METRIC_COLUMNS, rows)
    _write_csv(os.path.join(cfg.out, "timings.csv"), ("method", "step", *PHASES), trows)
    with open(os.path.join(cfg.out, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return code


def _sweep_one(args):
    cfg = RunConfig(**args)
    code = run(cfg)
    return args, code


def sweep(base: dict, dxs, workers=None) -> int:
    """Run one configuration per dx in a process pool and merge the tables."""
    root = base.get("out", "out")
    os.makedirs(root, exist_ok=True)
    jobs = []
    for dx in dxs:
        a = dict(base, dx=dx, out=os.path.join(root, f"dx_{dx:g}"))
        RunConfig(**a)
        jobs.append(a)
    n = workers or min(len(jobs), os.cpu_count() or 1)
    if n > 1:
        with multiprocessing.get_context("spawn").Pool(n) as pool:
            results = pool.map(_sweep_one, jobs)
    else:
        results = [_sweep_one(a) for a in jobs]
    merged, summary_rows = [], []
    for a, code in results:
        with open(os.path.join(a["out"], "metrics.csv")) as f:
            for r in csv.DictReader(f):
                merged.append({"dx": repr(a["dx"]), **r})
        with open(os.path.join(a["out"], "summary.json")) as f:
            s = json.load(f)
        for method in ("ipmm-fv", "fv"):
            if method in s:
                summary_rows.append({"dx": a["dx"], "method": method, "exit": code,
                                     "cells": s[method].get("cells_mean", s[method].get("cells")),
                                     "l1_initial": s[method].get("l1_initial", ""),
                                     "l1_final": s[method].get("l1_final", ""),
                                     "time_total": sum(s[method]["timings_total"].values())})
    _write_csv(os.path.join(root, "metrics.csv"), ("dx", *METRIC_COLUMNS), merged)
    _write_csv(os.path.join(root, "sweep.csv"),
               ("dx", "method", "exit", "cells", "l1_initial", "l1_final", "time_total"),
               summary_rows)
    for r in summary_rows:
        print(f"dx={r['dx']:g} {r['method']}: L1 {r['l1_initial']} -> {r['l1_final']} "
              f"({r['time_total']:.2f} s)")
    return EXIT_OK if all(code == EXIT_OK for _, code in results) else EXIT_FAIL


# ----------------------------------------------------------------------
# verify


def verify(suite: str, trials: int | None = None, seed: int = 0) -> int:
    from . import suites

    if suite == "delaunay":
        r = suites.delaunay_stress(trials or 500, seed=seed)
        ok = r["failures"] == 0
        print(f"delaunay: {r['trials']} sequences, {r['operations']} operations, "
              f"{r['failures']} failures")
    elif suite == "theorem":
        r = suites.theorem_suite(trials or 10000, seed=seed)
        ok = r["failures"] == 0
        print(f"theorem: {r['trials']} trials, {r['failures']} violations, {r['skipped']} skipped")
    elif suite == "conservation":
        ok = True
        for kind in PROJECTIONS:
            r = suites.conservation_stress(trials or 1000, seed=seed, kind=kind)
            good = r["drift"] <= 1e-8 and not r["delaunay"]
            ok = ok and good
            print(f"conservation[{kind}]: {r['operations']} operations, relative drift "
                  f"{r['drift']:.3e}, worst single operation {r['worst_op']:.3e}")
    elif suite == "preservation":
        r = suites.preservation_stress(trials or 1000, seed=seed)
        ok = r["failures"] == 0
        print(f"preservation: {r['steps']} steps, {r['failures']} failing steps, "
              f"{r['repairs']} repairs")
    else:
        raise ConfigError(f"unknown suite {suite!r}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# ----------------------------------------------------------------------
# argument parsing


def _add_run_flags(p, multi_dx=False):
    p.add_argument("--benchmark", choices=BENCHMARKS)
    if multi_dx:
        p.add_argument("--dx", type=float, nargs="+", required=True)
    else:
        p.add_argument("--dx", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--projection", choices=PROJECTIONS)
    p.add_argument("--out")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--validate", choices=VALIDATE)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")


def build_parser():
    ap = argparse.ArgumentParser(prog="ipmm", description="Interface preserving moving mesh benchmarks")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one benchmark")
    _add_run_flags(r)
    r.add_argument("--quiet", action="store_true")
    s = sub.add_parser("sweep", help="run a benchmark for several mesh widths in parallel")
    _add_run_flags(s, multi_dx=True)
    s.add_argument("--workers", type=int)
    v = sub.add_parser("verify", help="run a randomized property suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--trials", type=int)
    v.add_argument("--seed", type=int, default=0)
    return ap


_FIELDS = [f.name for f in dataclasses.fields(RunConfig)]


def config_from_args(ns, skip=()) -> dict:
    base = {}
    if getattr(ns, "config", None):
        with open(ns.config) as f:
            base = json.load(f)
        unknown = set(base) - set(_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for k in _FIELDS:
        if k in skip:
            continue
        v = getattr(ns, k, None)
        if v is not None:
            base[k] = v
    return base


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        if ns.command == "run":
            cfg = RunConfig(**config_from_args(ns))
            return run(cfg, log=not ns.quiet)
        if ns.command == "sweep":
            base = config_from_args(ns, skip=("dx",))
            return sweep(base, ns.dx, ns.workers)
        return verify(ns.suite, ns.trials, ns.seed)
    except (ConfigError, OSError, json.JSONDecodeError) as e:
        print(f"ipmm: {e}", file=sys.stderr)
        return EXIT_USAGE


__all__ = [
    "RunConfig",
    "build_parser",
    "generate_initial_mesh",
    "main",
    "run",
    "sweep",
    "verify",
    "write_interface_vtk",
    "write_vtk",
]
