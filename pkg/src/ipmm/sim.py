"""Benchmarks on the interface-preserving moving mesh.

Three prescribed-motion problems: a radially pulsating star, the reversing
single vortex, and rigid rotation of a slotted disk (used for linear
advection, compared against a plain upwind finite-volume scheme on a static
mesh).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dmesh import MeshError, Triangulation, build, validate_delaunay
from .geom import winding_number
from .iface import (
    Interface,
    MoveReport,
    check_preservation,
    coarsen_interface,
    interface_edge_mask,
    interface_measures,
    move_interface,
    one_sided_distance,
    polyline_distance,
    refine_interface,
    seed_interface,
)
from .mmesh import MeshState, MoveTooFar, ProjectionKind, total_mass

PHASES = ("ensure", "move", "coarse-bulk", "refine-bulk", "refine-interface",
          "coarsen-interface", "fv")


class ValidationError(MeshError):
    pass


class CFLError(ValueError):
    pass


# ----------------------------------------------------------------------
# motion fields


def star2d_velocity(t, xy):
    x, y = xy[:, 0], xy[:, 1]
    f = -math.sin(2 * math.pi * t) * np.cos(2 * math.ceil(t) * np.arctan2(y, x))
    return f[:, None] * xy


def vortex2d_velocity(t, xy, t_end=8.0):
    x, y = xy[:, 0], xy[:, 1]
    s = math.cos(math.pi * t / t_end)
    u = -np.sin(np.pi * x) ** 2 * np.sin(2 * np.pi * y)
    v = np.sin(2 * np.pi * x) * np.sin(np.pi * y) ** 2
    return s * np.column_stack((u, v))


def rotation_velocity(t, xy):
    return np.column_stack((-xy[:, 1], xy[:, 0]))


@dataclass
class MotionField:
    name: str
    t_end: float

    def __call__(self, t, xy):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if self.name == "star2d":
            return star2d_velocity(t, xy)
        if self.name == "vortex2d":
            return vortex2d_velocity(t, xy, self.t_end)
        if self.name == "circadv":
            return rotation_velocity(t, xy)
        raise ValueError(f"unknown motion field {self.name}")


# ----------------------------------------------------------------------
# geometry of the benchmarks


def circle_polygon(center, radius, n):
    a = 2 * np.pi * np.arange(n) / n
    return [(center[0] + radius * math.cos(t), center[1] + radius * math.sin(t)) for t in a]


SLOT_HALF_WIDTH = 0.15
SLOT_TOP = 2.2
DISK_CENTER = (0.0, 2.0)
DISK_RADIUS = 1.0


def _subdivide(p, q, h):
    n = max(1, math.ceil(math.dist(p, q) / h - 1e-9))
    return [(p[0] + (q[0] - p[0]) * k / n, p[1] + (q[1] - p[1]) * k / n) for k in range(n)]


def slotted_disk_polygon(h):
    """Counterclockwise slotted disk; the slot opens downward."""
    cx, cy = DISK_CENTER
    r, w = DISK_RADIUS, SLOT_HALF_WIDTH
    yb = cy - math.sqrt(r * r - w * w)
    a0 = math.atan2(yb - cy, w)
    a1 = math.atan2(yb - cy, -w) + 2 * math.pi
    n = max(3, math.ceil(r * (a1 - a0) / h - 1e-9))
    pts = [(cx + r * math.cos(a0 + (a1 - a0) * k / n), cy + r * math.sin(a0 + (a1 - a0) * k / n))
           for k in range(n)]
    pts += _subdivide((-w, yb), (-w, SLOT_TOP), h)
    pts += _subdivide((-w, SLOT_TOP), (w, SLOT_TOP), h)
    pts += _subdivide((w, SLOT_TOP), (w, yb), h)
    return pts


def slotted_disk_indicator(t, x, y):
    """Exact solution of the rotation problem: indicator at time t."""
    c, s = math.cos(t), math.sin(t)
    x0 = c * x + s * y
    y0 = -s * x + c * y
    inside = x0 ** 2 + (y0 - DISK_CENTER[1]) ** 2 <= DISK_RADIUS ** 2
    slot = (np.abs(x0) <= SLOT_HALF_WIDTH) & (y0 <= SLOT_TOP)
    return (inside & ~slot).astype(float)


def _disk_wedge_area(ax, ay, bx, by, r):
    """Signed area of the disk |x| <= r intersected with the triangle (0, a, b)."""
    dx, dy = bx - ax, by - ay
    A = dx * dx + dy * dy
    if A == 0.0:
        return 0.0
    B = ax * dx + ay * dy
    C = ax * ax + ay * ay - r * r
    disc = B * B - A * C
    # the segment is inside the disk exactly between the roots s_lo < s < s_hi
    s_lo = s_hi = 0.0
    cuts = [0.0, 1.0]
    if disc > 0.0:
        sq = math.sqrt(disc)
        s_lo, s_hi = (-B - sq) / A, (-B + sq) / A
        cuts += [s for s in (s_lo, s_hi) if 0.0 < s < 1.0]
    cuts.sort()
    out = 0.0
    for s0, s1 in zip(cuts, cuts[1:]):
        px, py = ax + s0 * dx, ay + s0 * dy
        qx, qy = ax + s1 * dx, ay + s1 * dy
        cr = px * qy - py * qx
        if s_lo < 0.5 * (s0 + s1) < s_hi:
            out += 0.5 * cr
        else:
            out += 0.5 * r * r * math.atan2(cr, px * qx + py * qy)
    return out


def disk_polygon_area(xs, ys, center, r):
    """Area of a counterclockwise polygon intersected with a disk."""
    n = len(xs)
    cx, cy = center
    return sum(_disk_wedge_area(xs[k] - cx, ys[k] - cy, xs[(k + 1) % n] - cx,
                                ys[(k + 1) % n] - cy, r) for k in range(n))


def clip_box(xs, ys, x0, x1, y0, y1):
    """Sutherland-Hodgman clip of a convex polygon to an axis-aligned box."""
    pts = list(zip(xs, ys))
    for axis, bound, keep_below in ((0, x0, False), (0, x1, True), (1, y0, False), (1, y1, True)):
        if not pts:
            break
        out = []
        for k in range(len(pts)):
            p, q = pts[k], pts[(k + 1) % len(pts)]
            pin = p[axis] <= bound if keep_below else p[axis] >= bound
            qin = q[axis] <= bound if keep_below else q[axis] >= bound
            if pin:
                out.append(p)
            if pin != qin:
                s = (bound - p[axis]) / (q[axis] - p[axis])
                out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
        pts = out
    return [p[0] for p in pts], [p[1] for p in pts]


def slotted_disk_area():
    """Exact area of the slotted disk."""
    w, r = SLOT_HALF_WIDTH, DISK_RADIUS
    top = SLOT_TOP - DISK_CENTER[1]
    cut = 2 * w * top + (w * math.sqrt(r * r - w * w) + r * r * math.asin(w / r))
    return math.pi * r * r - cut


def slotted_disk_cell_areas(t, a, b, c):
    """Exact area of each triangle (a, b, c) inside the slotted disk at time t."""
    co, si = math.cos(t), math.sin(t)
    rot = np.array([[co, si], [-si, co]])
    P = np.stack((a @ rot.T, b @ rot.T, c @ rot.T), axis=1)
    cx, cy = DISK_CENTER
    r, w = DISK_RADIUS, SLOT_HALF_WIDTH
    d = np.hypot(P[:, :, 0] - cx, P[:, :, 1] - cy)
    out = np.zeros(len(P))
    lo = P.min(axis=1)
    hi = P.max(axis=1)
    ext = np.max(np.linalg.norm(P - P.mean(axis=1)[:, None], axis=2), axis=1)
    dc = np.hypot(P.mean(axis=1)[:, 0] - cx, P.mean(axis=1)[:, 1] - cy)
    near = dc <= r + ext
    slot = (hi[:, 0] >= -w) & (lo[:, 0] <= w) & (lo[:, 1] <= SLOT_TOP)
    inside = (d <= r).all(axis=1) & ~slot
    area = 0.5 * np.abs((P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1])
                        - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0]))
    out[inside] = area[inside]
    for k in np.flatnonzero(near & ~inside):
        xs, ys = list(P[k, :, 0]), list(P[k, :, 1])
        if (xs[1] - xs[0]) * (ys[2] - ys[0]) - (ys[1] - ys[0]) * (xs[2] - xs[0]) < 0:
            xs.reverse()
            ys.reverse()
        v = disk_polygon_area(xs, ys, DISK_CENTER, r)
        if slot[k]:
            sx, sy = clip_box(xs, ys, -w, w, cy - r, SLOT_TOP)
            if len(sx) >= 3:
                v -= disk_polygon_area(sx, sy, DISK_CENTER, r)
        out[k] = v
    return out


def l1_error_piecewise(u, inside, area):
    """Exact L1 error of cell constants u against an indicator with cell overlap ``inside``."""
    return float(np.sum(np.abs(u - 1.0) * inside + np.abs(u) * (area - inside)))


@dataclass
class Benchmark:
    name: str
    box: tuple
    polygon: list
    t_end: float
    motion: MotionField
    center: tuple | None = None
    radius: float | None = None
    exact: object = None
    exact_cell_areas: object = None


def make_benchmark(name, dx, t_end=None) -> Benchmark:
    if name == "star2d":
        te = 3.0 if t_end is None else t_end
        n = max(8, math.ceil(2 * math.pi * 0.5 / dx))
        return Benchmark(name, (-1.0, 1.0, -1.0, 1.0), circle_polygon((0.0, 0.0), 0.5, n), te,
                         MotionField(name, te), (0.0, 0.0), 0.5)
    if name == "vortex2d":
        te = 8.0 if t_end is None else t_end
        n = max(8, math.ceil(2 * math.pi * 0.15 / dx))
        return Benchmark(name, (0.0, 1.0, 0.0, 1.0), circle_polygon((0.5, 0.75), 0.15, n), te,
                         MotionField(name, 8.0), (0.5, 0.75), 0.15)
    if name == "circadv":
        te = math.pi / 2 if t_end is None else t_end
        return Benchmark(name, (-4.0, 4.0, -4.0, 4.0), slotted_disk_polygon(dx), te,
                         MotionField(name, te), exact=slotted_disk_indicator,
                         exact_cell_areas=slotted_disk_cell_areas)
    raise ValueError(f"unknown benchmark {name}")


def lattice_points(box, dx, seed=0):
    """Hexagonal lattice in a box, boundary points on the box edges."""
    x0, x1, y0, y1 = box
    if dx <= 0 or dx > min(x1 - x0, y1 - y0) / 4:
        raise ValueError("dx must be positive and at most a quarter of the box extent")
    nx = max(2, round((x1 - x0) / dx))
    # an even row count keeps the row below the top edge offset
    ny = max(2, 2 * round((y1 - y0) / (dx * math.sqrt(3))))
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny
    xb = [x1 if i == nx else x0 + i * hx for i in range(nx + 1)]
    yb = [y0 + j * hy for j in range(1, ny)]
    bnd = [(x, y0) for x in xb] + [(x, y1) for x in xb]
    bnd += [(x0, y) for y in yb] + [(x1, y) for y in yb]
    interior = []
    for j in range(1, ny):
        y = y0 + j * hy
        if j % 2:
            xs = [x0 + (i + 0.5) * hx for i in range(nx)]
        else:
            xs = [x0 + i * hx for i in range(1, nx)]
        interior += [(x, y) for x in xs]
    rng = np.random.default_rng(seed)
    jit = rng.uniform(-1.0, 1.0, size=(len(interior), 2)) * 1e-6 * dx
    interior = [(p[0] + d[0], p[1] + d[1]) for p, d in zip(interior, jit)]
    return bnd, interior


def generate_initial_mesh(box, dx, seed=0) -> Triangulation:
    bnd, interior = lattice_points(box, dx, seed)
    return build(bnd + interior)


def cell_key_set(t: Triangulation):
    """Cells as sorted vertex-position triples."""
    out = set()
    px, py, cv = t.px, t.py, t.cv
    for c in t.cells():
        b = 3 * c
        out.add(tuple(sorted((px[v], py[v]) for v in cv[b:b + 3])))
    return out


# ----------------------------------------------------------------------
# quadrature and measures


def _sub_barycentric(n=16):
    pts = []
    for i in range(n):
        for j in range(n - i):
            pts.append(((3 * i + 1) / (3 * n), (3 * j + 1) / (3 * n)))
            if i + j <= n - 2:
                pts.append(((3 * i + 2) / (3 * n), (3 * j + 2) / (3 * n)))
    return np.array(pts)


_SUB = _sub_barycentric()


def cell_geometry(t: Triangulation):
    slots, tri, nbr, xy = t.arrays()
    a, b, c = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    return slots, tri, nbr, xy, a, b, c, area


def subcell_means(fn, a, b, c, chunk=4096):
    """Mean of fn over 256 midpoint samples of each triangle."""
    out = np.empty(len(a))
    s, r = _SUB[:, 0], _SUB[:, 1]
    for k in range(0, len(a), chunk):
        A, B, C = a[k:k + chunk], b[k:k + chunk], c[k:k + chunk]
        X = A[:, None, 0] + s * (B[:, None, 0] - A[:, None, 0]) + r * (C[:, None, 0] - A[:, None, 0])
        Y = A[:, None, 1] + s * (B[:, None, 1] - A[:, None, 1]) + r * (C[:, None, 1] - A[:, None, 1])
        out[k:k + chunk] = fn(X, Y).mean(axis=1)
    return out


def l1_error_cells(u, fn, a, b, c, area):
    """Integral of |u_h - u_exact| with 256 midpoint samples per cell."""
    out = 0.0
    s, r = _SUB[:, 0], _SUB[:, 1]
    chunk = 4096
    for k in range(0, len(a), chunk):
        A, B, C = a[k:k + chunk], b[k:k + chunk], c[k:k + chunk]
        X = A[:, None, 0] + s * (B[:, None, 0] - A[:, None, 0]) + r * (C[:, None, 0] - A[:, None, 0])
        Y = A[:, None, 1] + s * (B[:, None, 1] - A[:, None, 1]) + r * (C[:, None, 1] - A[:, None, 1])
        err = np.abs(u[k:k + chunk, None] - fn(X, Y)).mean(axis=1)
        out += float(np.sum(err * area[k:k + chunk]))
    return out


def l1_error(t: Triangulation, fn) -> float:
    slots, tri, nbr, xy, a, b, c, area = cell_geometry(t)
    return l1_error_cells(t.data[slots, 0], fn, a, b, c, area)


def circle_deviation(g: Interface, center, radius):
    xy = g.positions()
    d = np.hypot(xy[:, 0] - center[0], xy[:, 1] - center[1]) - radius
    return float(d.min()), float(d.max()), float(d.mean())


# ----------------------------------------------------------------------
# finite volumes


def upwind_update(u, dt, tri, nbr, xy, area, velocity, t, blocked=None, swept=None,
                  area_old=None):
    """One first-order upwind step of u_t + div(a u) = 0, zero flux on the hull.

    ``blocked`` masks edges (N, 3) that carry no flux.  On a moving mesh
    ``swept`` (N, 3) holds the outward area swept by each edge during the
    step and ``area_old`` the cell areas before it; u refers to the old
    cells, and only the flux relative to the edge motion is exchanged.
    """
    du = np.zeros_like(u)
    for i in range(3):
        pa = xy[tri[:, (i + 1) % 3]]
        pb = xy[tri[:, (i + 2) % 3]]
        mid = 0.5 * (pa + pb)
        nl = np.column_stack((pb[:, 1] - pa[:, 1], pa[:, 0] - pb[:, 0]))
        F = np.einsum("ij,ij->i", velocity(t, mid), nl)
        if swept is not None:
            F = F - swept[:, i] / dt
        j = nbr[:, i]
        F = np.where(j < 0, 0.0, F)
        if blocked is not None:
            F = np.where(blocked[:, i], 0.0, F)
        up = np.where(F > 0, u, u[np.maximum(j, 0)])
        du -= F * up
    if area_old is None:
        return u + dt * du / area
    return (u * area_old + dt * du) / area


def swept_areas(tri, xy_old, xy_new):
    """Outward area swept by each cell edge (N, 3) as vertices move old -> new."""
    out = np.empty(tri.shape, dtype=float)
    for i in range(3):
        a, b = tri[:, (i + 1) % 3], tri[:, (i + 2) % 3]
        a0, b0, a1, b1 = xy_old[a], xy_old[b], xy_new[a], xy_new[b]
        # shoelace of the quadrilateral (a0, a1, b1, b0)
        q = (a0, a1, b1, b0)
        s = 0.0
        for k in range(4):
            p, r = q[k], q[(k + 1) % 4]
            s = s + p[:, 0] * r[:, 1] - r[:, 0] * p[:, 1]
        out[:, i] = 0.5 * s
    return out


def insphere_diameters(a, b, c, area):
    p = (np.linalg.norm(b - a, axis=1) + np.linalg.norm(c - b, axis=1) + np.linalg.norm(a - c, axis=1))
    return 4.0 * area / p


def check_cfl(dt, velocity, t, a, b, c, area):
    verts = np.vstack((a, b, c))
    vmax = float(np.max(np.linalg.norm(velocity(t, verts), axis=1)))
    hmin = float(np.min(insphere_diameters(a, b, c, area)))
    cfl = dt * vmax / hmin
    if cfl > 1.0:
        raise CFLError(f"CFL number {cfl:.3f} exceeds 1")
    return cfl


class StaticFV:
    """Upwind finite volumes on a fixed mesh (no interface)."""

    def __init__(self, box, dx, dt, velocity, u0_fn, seed=0):
        self.tri_mesh = generate_initial_mesh(box, dx, seed)
        slots, tri, nbr, xy, a, b, c, area = cell_geometry(self.tri_mesh)
        index = np.full(len(self.tri_mesh.calive), -1, dtype=np.int64)
        index[slots] = np.arange(len(slots))
        self.tri = tri
        self.nbr = np.where(nbr >= 0, index[np.maximum(nbr, 0)], -1)
        self.xy = xy
        self.abc = (a, b, c)
        self.area = area
        self.dt = dt
        self.velocity = velocity
        self.k = 0
        self.cfl = check_cfl(dt, velocity, 0.0, a, b, c, area)
        self.u = subcell_means(lambda X, Y: u0_fn(0.0, X, Y), a, b, c)

    @property
    def t(self):
        return self.k * self.dt

    def step(self):
        self.u = upwind_update(self.u, self.dt, self.tri, self.nbr, self.xy, self.area,
                               self.velocity, self.t)
        self.k += 1

    def mass(self):
        return float(np.sum(self.u * self.area))

    def l1_error(self, fn):
        a, b, c = self.abc
        return l1_error_cells(self.u, fn, a, b, c, self.area)

    def l1_error_exact(self, cell_areas, t=None):
        a, b, c = self.abc
        tt = self.t if t is None else t
        return l1_error_piecewise(self.u, cell_areas(tt, a, b, c), self.area)


# ----------------------------------------------------------------------
# the moving mesh simulation


@dataclass
class SimConfig:
    benchmark: str = "star2d"
    dx: float = 0.1
    dt: float = 2e-4
    t_end: float | None = None
    projection: str = "average"
    validate: str = "off"
    seed: int = 0
    max_halvings: int = 6
    sparse_every: int = 100


@dataclass
class StepMetrics:
    step: int
    t: float
    cells: int
    interface_vertices: int
    length: float
    area: float
    epsilon: float
    mass: float
    timings: dict = field(default_factory=dict)
    substeps: int = 1
    removed: int = 0
    reinserted: int = 0
    refined: int = 0
    coarsened: int = 0
    repairs: int = 0
    l1: float | None = None


class Simulation:
    """Interface moving with a prescribed field; optional IPMM-FV transport."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.bench = make_benchmark(cfg.benchmark, cfg.dx, cfg.t_end)
        self.dt = cfg.dt
        self.t_end = self.bench.t_end
        tri = generate_initial_mesh(self.bench.box, cfg.dx, cfg.seed)
        self.background_cells = cell_key_set(tri)
        self.ms = MeshState(tri, ProjectionKind(cfg.projection))
        self.g = seed_interface(self.ms, self.bench.polygon)
        self.thresholds = self.g.thresholds
        for c in tri.cells():
            tri.data[c, 0] = float(tri.cphase[c])
        self.k = 0
        self.initial_mass = float(total_mass(tri)[0])
        self._mass = self.initial_mass
        self.mass_drift = 0.0
        self.history: list[StepMetrics] = []
        self._check(force=cfg.validate != "off")

    @property
    def t(self):
        return self.k * self.dt

    @property
    def tri(self) -> Triangulation:
        return self.ms.tri

    def done(self):
        return self.t >= self.t_end - 1e-12 * max(1.0, self.t_end)

    def _check(self, force=False):
        mode = self.cfg.validate
        if not force:
            if mode == "off":
                return
            if mode == "sparse" and self.k % self.cfg.sparse_every:
                return
        bad = validate_delaunay(self.tri)
        if bad:
            raise ValidationError(f"Delaunay violations at step {self.k}: {bad[:5]}")
        bad = check_preservation(self.g)
        if bad:
            raise ValidationError(f"interface violations at step {self.k}: {bad[:5]}")

    def _interface_move(self, velocity, fv=False):
        """Forward Euler motion of the interface, halving dt on MoveTooFar.

        With ``fv`` every substep runs the transport right after its Move
        phase, on the mesh the interface vertices have just deformed.
        """
        g = self.g
        t0 = self.t
        ms = self.ms
        ms.deform = "ale" if fv else "keep"
        for halvings in range(self.cfg.max_halvings + 1):
            n = 2 ** halvings
            h = self.dt / n
            try:
                reps = []
                for s in range(n):
                    order = g.order()
                    xy = g.positions()
                    ts = t0 + s * h
                    tgt = xy + h * velocity(ts, xy)
                    cb = None
                    if fv:
                        ms.track = {}
                        cb = lambda g, h=h, ts=ts: self._fv_update(h, ts, ms.track)
                    try:
                        reps.append(move_interface(g, dict(zip(order, map(tuple, tgt))),
                                                   after_move=cb))
                    finally:
                        ms.track = None
                return reps, n
            except MoveTooFar:
                if reps:
                    raise
                continue
        raise MoveTooFar(f"step {self.k}: still too far after {self.cfg.max_halvings} halvings")

    def step(self, fv: bool = False) -> StepMetrics:
        t = self.tri
        timings = dict.fromkeys(PHASES, 0.0)
        mass0 = self._mass
        reps, n = self._interface_move(self.bench.motion, fv)
        pre = None
        for r in reps:
            for k, v in r.timings.items():
                timings[k] += v
        if reps:
            pre = self.g.positions()
        t1 = time.perf_counter()
        nref = refine_interface(self.g)
        t2 = time.perf_counter()
        ncoa = coarsen_interface(self.g)
        t3 = time.perf_counter()
        timings["refine-interface"] = t2 - t1
        timings["coarsen-interface"] = t3 - t2
        mass1 = float(total_mass(t)[0])
        self.mass_drift += abs(mass1 - mass0)
        self.k += 1
        eps = max(r.epsilon for r in reps) if reps else 0.0
        if nref or ncoa:
            xs, ys = self.g.polygon_xy()
            eps = max(eps, one_sided_distance(pre, xs, ys))
        self.g.epsilon_last = eps
        length, area, _ = interface_measures(self.g)
        self._mass = mass1
        m = StepMetrics(self.k, self.t, t.n_cells, len(self.g), length, area, eps,
                        self._mass, timings, n,
                        sum(r.removed_ensure + r.removed_coarse for r in reps),
                        sum(r.reinserted for r in reps), nref, ncoa,
                        sum(r.repairs for r in reps))
        self.history.append(m)
        self._check()
        return m

    def _fv_update(self, h, ts, moved):
        """Upwind transport over one (sub)step on the current moving mesh.

        Edges carry the flux relative to their own motion (vertices in
        ``moved`` map to their old positions); interface edges carry none.
        """
        t = self.tri
        slots, tri, nbr, xy, a, b, c, area = cell_geometry(t)
        index = np.full(len(t.calive), -1, dtype=np.int64)
        index[slots] = np.arange(len(slots))
        nb = np.where(nbr >= 0, index[np.maximum(nbr, 0)], -1)
        blocked = interface_edge_mask(t, self.g, tri)
        check_cfl(h, self.bench.motion, ts, a, b, c, area)
        swept = area_old = None
        if moved:
            xy_old = xy.copy()
            ids = np.fromiter(moved.keys(), dtype=np.int64, count=len(moved))
            xy_old[ids] = np.array(list(moved.values()))
            swept = swept_areas(tri, xy_old, xy)
            area_old = area - swept.sum(axis=1)
        u = t.data[slots, 0]
        t.data[slots, 0] = upwind_update(u, h, tri, nb, xy, area, self.bench.motion, ts,
                                         blocked, swept, area_old)

    def run(self, fv: bool = False, callback=None):
        while not self.done():
            m = self.step(fv=fv)
            if callback is not None:
                callback(self, m)
        return self.history

    def l1_error(self, t=None, quadrature=False):
        """L1 error against the exact solution.

        Uses exact cell overlap areas when the benchmark provides them,
        otherwise (or with ``quadrature``) 256 midpoint samples per cell.
        """
        if self.bench.exact is None:
            raise ValueError("benchmark has no exact solution")
        tt = self.t if t is None else t
        if self.bench.exact_cell_areas is not None and not quadrature:
            slots, tri, nbr, xy, a, b, c, area = cell_geometry(self.tri)
            inside = self.bench.exact_cell_areas(tt, a, b, c)
            return l1_error_piecewise(self.tri.data[slots, 0], inside, area)
        return l1_error(self.tri, lambda X, Y: self.bench.exact(tt, X, Y))

    def background_mismatches(self):
        """Far-field cells that are not cells of the initial background mesh."""
        t = self.tri
        slots, tri, nbr, xy, a, b, c, area = cell_geometry(t)
        d = max(self.thresholds.dx_min, float(np.max(self.g.edge_lengths())))
        bx, by = b - a, c - a
        den = 2.0 * (bx[:, 0] * by[:, 1] - bx[:, 1] * by[:, 0])
        b2 = np.einsum("ij,ij->i", bx, bx)
        c2 = np.einsum("ij,ij->i", by, by)
        ux = (by[:, 1] * b2 - bx[:, 1] * c2) / den
        uy = (bx[:, 0] * c2 - by[:, 0] * b2) / den
        R = np.hypot(ux, uy)
        centers = a + np.column_stack((ux, uy))
        xs, ys = self.g.polygon_xy()
        dist = polyline_distance(centers, xs, ys) - R
        far = np.flatnonzero(dist > d)
        bad = []
        for k in far:
            key = tuple(sorted((float(p[0]), float(p[1])) for p in (a[k], b[k], c[k])))
            if key not in self.background_cells:
                bad.append(int(slots[k]))
        return bad, len(far)


def phase_area(t: Triangulation, phase=1):
    slots, tri, nbr, xy, a, b, c, area = cell_geometry(t)
    ph = np.array(t.cphase)[slots]
    return float(area[ph == phase].sum())


def point_phase(g: Interface, x, y):
    xs, ys = g.polygon_xy()
    return 1 if winding_number(x, y, xs, ys) else 0
