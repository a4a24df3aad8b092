"""Interface-preserving remeshing around a closed polygonal interface.

The interface is a closed counterclockwise chain of mesh edges whose
vertices have kind INTERFACE.  Phase 1 lies to the left of every interface
edge.  Moving the interface keeps the chain made of mesh edges by clearing
bulk vertices out of the Gabriel circles of the edges at their target
positions before the vertices are moved; cleared positions are remembered
in a background list and reinserted once the interface has moved away.
"""
from __future__ import annotations

import heapq
import math
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, cKDTree

from .dmesh import (
    DuplicatePoint,
    MeshError,
    OutsideHull,
    Triangulation,
    VertexKind,
    build,
)
from .geom import (
    in_diametral_xy,
    min_covering_circle,
    orient_xy,
    polygon_area,
    segments_cross_xy,
    segments_intersect_xy,
    winding_number,
)
from .mmesh import MeshState, MoveTooFar, omega_mesh

BULK = int(VertexKind.BULK)
IFACE = int(VertexKind.INTERFACE)


class InterfaceError(MeshError):
    pass


class BoundaryConflict(InterfaceError):
    pass


@dataclass(frozen=True)
class Thresholds:
    dx_min: float
    dx_gamma_min: float
    dx_gamma_max: float
    p: float
    h_min: float
    h_gamma_min: float
    h_gamma_max: float


def threshold_values(h_min, hg_min, hg_max, p_floor=0.1) -> Thresholds:
    # smallest p with (1 + p) hg_max >= 3 (1 - p) hg_min
    p = max(p_floor, (3.0 * hg_min - hg_max) / (hg_max + 3.0 * hg_min))
    return Thresholds(0.9 * h_min, (1.0 - p) * hg_min, (1.0 + p) * hg_max, p,
                      h_min, hg_min, hg_max)


@dataclass
class MoveReport:
    removed_ensure: int = 0
    moved: int = 0
    relocated_in_place: int = 0
    removed_coarse: int = 0
    reinserted: int = 0
    repairs: int = 0
    epsilon: float = 0.0
    omega: float = math.inf
    max_displacement: float = 0.0
    timings: dict = field(default_factory=dict)


class Interface:
    """Closed interface polygon living on a MeshState."""

    def __init__(self, ms: MeshState, verts, thresholds: Thresholds | None = None):
        self.ms = ms
        verts = list(verts)
        n = len(verts)
        self.nxt = {verts[i]: verts[(i + 1) % n] for i in range(n)}
        self.prv = {verts[(i + 1) % n]: verts[i] for i in range(n)}
        self.anchor = verts[0]
        self.background: list = []
        self.thresholds = thresholds
        self.epsilon_last = 0.0
        self.repairs_total = 0
        ms.iface_dir = {(a, self.nxt[a]) for a in verts}
        ms.polygon = self.polygon_xy

    def __len__(self):
        return len(self.nxt)

    def hull_corners(self):
        """Edges of the convex hull between its corner vertices (cached)."""
        if getattr(self, "_corners", None) is None:
            t = self.tri
            hv = sorted(t.hull_vertices())
            pts = np.array([(t.px[v], t.py[v]) for v in hv])
            h = ConvexHull(pts)
            c = [tuple(pts[i]) for i in h.vertices]
            self._corners = [(c[i], c[(i + 1) % len(c)]) for i in range(len(c))]
        return self._corners

    @property
    def tri(self) -> Triangulation:
        return self.ms.tri

    def order(self):
        out = [self.anchor]
        nxt = self.nxt
        v = nxt[self.anchor]
        while v != self.anchor:
            out.append(v)
            v = nxt[v]
            if len(out) > len(nxt):
                raise InterfaceError("interface chain is not a single cycle")
        return out

    def edges(self):
        nxt = self.nxt
        return [(a, nxt[a]) for a in self.order()]

    def polygon_xy(self):
        t = self.tri
        o = self.order()
        return [t.px[v] for v in o], [t.py[v] for v in o]

    def positions(self):
        t = self.tri
        return np.array([(t.px[v], t.py[v]) for v in self.order()])

    def edge_lengths(self):
        xy = self.positions()
        return np.linalg.norm(np.roll(xy, -1, axis=0) - xy, axis=1)

    # -- structural edits -------------------------------------------

    def _split(self, a, b, vid):
        ms = self.ms
        self.nxt[a] = vid
        self.prv[vid] = a
        self.nxt[vid] = b
        self.prv[b] = vid
        ms.iface_dir.discard((a, b))
        ms.iface_dir.add((a, vid))
        ms.iface_dir.add((vid, b))

    def _join(self, v):
        ms = self.ms
        u, w = self.prv.pop(v), self.nxt.pop(v)
        self.nxt[u] = w
        self.prv[w] = u
        ms.iface_dir.discard((u, v))
        ms.iface_dir.discard((v, w))
        ms.iface_dir.add((u, w))
        if self.anchor == v:
            self.anchor = w
        return u, w


# ----------------------------------------------------------------------
# helpers


def _disk_hits_triangle(cx, cy, r, tri):
    (ax, ay), (bx, by), (qx, qy) = tri
    r2 = r * r * (1.0 + 1e-9) + 1e-300
    d1 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    d2 = (qx - bx) * (cy - by) - (qy - by) * (cx - bx)
    d3 = (ax - qx) * (cy - qy) - (ay - qy) * (cx - qx)
    if d1 >= 0 and d2 >= 0 and d3 >= 0:
        return True
    for (x0, y0), (x1, y1) in (((ax, ay), (bx, by)), ((bx, by), (qx, qy)), ((qx, qy), (ax, ay))):
        ex, ey = x1 - x0, y1 - y0
        l2 = ex * ex + ey * ey
        s = ((cx - x0) * ex + (cy - y0) * ey) / l2 if l2 > 0 else 0.0
        s = min(1.0, max(0.0, s))
        dx, dy = cx - x0 - s * ex, cy - y0 - s * ey
        if dx * dx + dy * dy <= r2:
            return True
    return False


def vertices_in_diametral(t: Triangulation, a, b, start_vertex):
    """Vertices inside or on the diametral circle of points a, b.

    Found by a breadth-first search over cells meeting the disk, seeded
    with the star of ``start_vertex`` (which must meet the disk).
    """
    ax, ay = a
    bx, by = b
    cx, cy = 0.5 * (ax + bx), 0.5 * (ay + by)
    r = 0.5 * math.hypot(bx - ax, by - ay)
    cn, cv, ghost = t.cn, t.cv, t.cghost
    px, py = t.px, t.py
    seen = set()
    stack = []
    for c in t.incident_cells(start_vertex):
        seen.add(c)
        stack.append(c)
    hits = set()
    tested = set()
    while stack:
        c = stack.pop()
        if not _disk_hits_triangle(cx, cy, r, t.cell_points(c)):
            continue
        b3 = 3 * c
        for i in range(3):
            v = cv[b3 + i]
            if v not in tested:
                tested.add(v)
                if in_diametral_xy(ax, ay, bx, by, px[v], py[v]) >= 0:
                    hits.add(v)
            n = cn[b3 + i]
            if n not in seen and not ghost[n]:
                seen.add(n)
                stack.append(n)
    return hits


def _strictly_inside_hull(t: Triangulation, p, hint_vertex):
    c = t._walk(p[0], p[1], t.vcell[hint_vertex])
    if t.cghost[c]:
        return False
    b = 3 * c
    cv, cn, ghost, px, py = t.cv, t.cn, t.cghost, t.px, t.py
    for i in range(3):
        if ghost[cn[b + i]]:
            u = cv[b + (i + 1) % 3]
            w = cv[b + (i + 2) % 3]
            if orient_xy(px[u], py[u], px[w], py[w], p[0], p[1]) == 0:
                return False
    return True


def polyline_distance(points, xs, ys, k=8):
    """Distance from each point to a closed polyline (vertices xs, ys)."""
    P = np.column_stack((xs, ys))
    Q = np.roll(P, -1, axis=0)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(P)
    if n == 0 or len(pts) == 0:
        return np.zeros(len(pts))
    lmax = float(np.max(np.linalg.norm(Q - P, axis=1)))
    tree = cKDTree(P)
    k = min(k, n)
    dv, iv = tree.query(pts, k=k)
    dv = dv.reshape(len(pts), k)
    iv = iv.reshape(len(pts), k)
    segs = np.concatenate((iv, (iv - 1) % n), axis=1)

    def seg_dist(q, sg):
        a, b = P[sg], Q[sg]
        ab = b - a
        l2 = np.sum(ab * ab, axis=-1)
        s = np.clip(np.sum((q - a) * ab, axis=-1) / np.where(l2 > 0, l2, 1.0), 0.0, 1.0)
        d = q - (a + s[..., None] * ab)
        return np.sqrt(np.min(np.sum(d * d, axis=-1), axis=-1))

    out = seg_dist(pts[:, None, :], segs)
    # any closer segment has an endpoint within out + lmax/2
    unsure = np.flatnonzero((k < n) & (dv[:, -1] <= out + 0.5 * lmax))
    for j in unsure:
        idx = np.asarray(tree.query_ball_point(pts[j], out[j] + 0.5 * lmax + 1e-300), dtype=np.int64)
        sg = np.unique(np.concatenate((idx, (idx - 1) % n)))
        out[j] = seg_dist(pts[j][None, :], sg[None, :])[0]
    return out


def one_sided_distance(pre_xy, xs, ys):
    """Max distance from the vertices and edge midpoints of ``pre_xy`` to a polyline."""
    pre = np.asarray(pre_xy, dtype=float)
    if len(pre) == 0:
        return 0.0
    mids = 0.5 * (pre + np.roll(pre, -1, axis=0))
    return float(np.max(polyline_distance(np.vstack((pre, mids)), xs, ys)))


# ----------------------------------------------------------------------
# thresholds and seeding


def compute_thresholds(g: Interface) -> Thresholds:
    """Thresholds from the 1%/99% percentiles of the current edge lengths."""
    if len(g) == 0:
        raise InterfaceError("empty interface")
    t = g.tri
    lg = g.edge_lengths()
    return threshold_values(bulk_h_min(t), float(np.percentile(lg, 1)),
                            float(np.percentile(lg, 99)))


def bulk_h_min(t: Triangulation) -> float:
    """1% percentile of the lengths of edges joining two bulk vertices."""
    kind = t.kind
    e = np.array([(a, b) for a, b in t.edges() if kind[a] == BULK and kind[b] == BULK])
    if len(e) == 0:
        raise InterfaceError("mesh has no bulk edges")
    xy = np.column_stack((t.px, t.py))
    return float(np.percentile(np.linalg.norm(xy[e[:, 0]] - xy[e[:, 1]], axis=1), 1))


def polygon_self_intersections(xs, ys):
    """Pairs of non-adjacent edges of a closed polygon that touch or cross."""
    n = len(xs)
    if n < 3:
        return [(0, 0)]
    P = np.column_stack((xs, ys))
    Q = np.roll(P, -1, axis=0)
    L = float(np.max(np.linalg.norm(Q - P, axis=1))) or 1.0
    lo = np.minimum(P, Q)
    hi = np.maximum(P, Q)
    buckets = defaultdict(list)
    for i in range(n):
        for gx in range(int(math.floor(lo[i, 0] / L)), int(math.floor(hi[i, 0] / L)) + 1):
            for gy in range(int(math.floor(lo[i, 1] / L)), int(math.floor(hi[i, 1] / L)) + 1):
                buckets[(gx, gy)].append(i)
    bad = set()
    for items in buckets.values():
        for ii in range(len(items)):
            i = items[ii]
            for j in items[ii + 1:]:
                if (i, j) in bad:
                    continue
                adjacent = j == (i + 1) % n or i == (j + 1) % n
                p1, p2, q1, q2 = P[i], Q[i], P[j], Q[j]
                if adjacent:
                    # adjacent edges may only share their common vertex
                    k = i if j == (i + 1) % n else j
                    other = j if k == i else i
                    a, s, b = P[k], Q[k], Q[other]
                    if n > 3 and orient_xy(a[0], a[1], s[0], s[1], b[0], b[1]) == 0 and \
                            (b[0] - s[0]) * (a[0] - s[0]) + (b[1] - s[1]) * (a[1] - s[1]) > 0:
                        bad.add((min(i, j), max(i, j)))
                    continue
                if segments_intersect_xy(p1[0], p1[1], p2[0], p2[1], q1[0], q1[1], q2[0], q2[1]):
                    bad.add((min(i, j), max(i, j)))
    return sorted(bad)


def seed_interface(ms: MeshState, polygon, thresholds: Thresholds | None = None) -> Interface:
    """Insert a closed polygon as interface and clear its Gabriel circles.

    The polygon may be given in either orientation.  Thresholds default to
    the percentiles of the mesh before seeding (bulk) and the polygon edges.
    """
    pts = [(float(x), float(y)) for x, y in polygon]
    if len(pts) < 3:
        raise InterfaceError("interface needs at least three vertices")
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    if polygon_self_intersections(xs, ys):
        raise InterfaceError("interface polygon self-intersects")
    if polygon_area(xs, ys) < 0:
        pts.reverse()
    t = ms.tri
    if thresholds is None:
        h_min = bulk_h_min(t)
        P = np.array(pts)
        lg = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
        thresholds = threshold_values(h_min, float(np.percentile(lg, 1)), float(np.percentile(lg, 99)))
    ids = []
    hint = None
    for p in pts:
        if not _strictly_inside_hull(t, p, t.vertices()[0] if hint is None else hint):
            raise BoundaryConflict(f"interface point {p} is not inside the domain")
        try:
            v, _, created = ms.insert(p, VertexKind.INTERFACE)
        except DuplicatePoint:
            w = _vertex_at(t, p)
            if t.kind[w] != BULK:
                raise InterfaceError(f"interface point {p} coincides with a non-bulk vertex")
            ms.remove(w)
            v, _, created = ms.insert(p, VertexKind.INTERFACE)
        ids.append(v)
        hint = v
    g = Interface(ms, ids, thresholds)
    targets = {v: (t.px[v], t.py[v]) for v in ids}
    _ensure(g, targets, MoveReport())
    _coarse_bulk(g, MoveReport())
    g.repairs_total += _repair_all(g)
    refresh_phases(g)
    return g


def _vertex_at(t: Triangulation, p):
    c = t.locate(p)
    for v in t.cv[3 * c:3 * c + 3]:
        if t.px[v] == p[0] and t.py[v] == p[1]:
            return v
    raise MeshError("vertex not found")


# ----------------------------------------------------------------------
# phases of the interface move


def _ensure(g: Interface, targets, rep: MoveReport):
    """Remove bulk vertices inside or on the Gabriel circles at the targets."""
    t = g.tri
    edges = g.edges()
    if not edges:
        return
    alive = np.flatnonzero(np.array(t.valive, dtype=bool))
    tree = cKDTree(np.column_stack((np.array(t.px)[alive], np.array(t.py)[alive])))
    px, py, kind = t.px, t.py, t.kind
    pa = np.array([targets.get(a, (px[a], py[a])) for a, _ in edges])
    pb = np.array([targets.get(b, (px[b], py[b])) for _, b in edges])
    centers = 0.5 * (pa + pb)
    radii = 0.5 * np.linalg.norm(pb - pa, axis=1)
    found = tree.query_ball_point(centers, radii * (1 + 1e-9) + 1e-300)
    doomed = set()
    for k, idx in enumerate(found):
        ax, ay = pa[k]
        bx, by = pb[k]
        for j in idx:
            v = int(alive[j])
            if kind[v] == BULK and v not in doomed and \
                    in_diametral_xy(ax, ay, bx, by, px[v], py[v]) >= 0:
                doomed.add(v)
    for v in sorted(doomed):
        g.background.append((px[v], py[v]))
        g.ms.remove(v)
    rep.removed_ensure += len(doomed)


def _coarse_bulk(g: Interface, rep: MoveReport):
    t = g.tri
    dmin = g.thresholds.dx_min
    px, py, kind = t.px, t.py, t.kind
    for v in g.order():
        while True:
            x, y = px[v], py[v]
            close = [w for w in t.adjacent_vertices(v)
                     if kind[w] == BULK and math.hypot(px[w] - x, py[w] - y) < dmin]
            if not close:
                break
            for w in close:
                g.background.append((px[w], py[w]))
                g.ms.remove(w)
                rep.removed_coarse += 1


def _cavity_cuts_interface(g: Interface, q, hint):
    t = g.tri
    zone = t.conflict_zone(q, hint=hint)
    cv, cn = t.cv, t.cn
    idir = g.ms.iface_dir
    for c in zone:
        b = 3 * c
        for i in range(3):
            if cn[b + i] in zone:
                u = cv[b + (i + 1) % 3]
                w = cv[b + (i + 2) % 3]
                if (u, w) in idir or (w, u) in idir:
                    return True
    return False


def _refine_bulk(g: Interface, rep: MoveReport):
    if not g.background:
        return
    t = g.tri
    dmin = g.thresholds.dx_min
    px, py = t.px, t.py
    edges = g.edges()
    lmax = max(math.hypot(px[b] - px[a], py[b] - py[a]) for a, b in edges)
    s = max(dmin, lmax)
    verts = defaultdict(list)
    mids = defaultdict(list)
    for a, b in edges:
        verts[(math.floor(px[a] / s), math.floor(py[a] / s))].append(a)
        mids[(math.floor(0.5 * (px[a] + px[b]) / s), math.floor(0.5 * (py[a] + py[b]) / s))].append((a, b))
    keep = []
    hint = None
    for q in g.background:
        qx, qy = q
        gx, gy = math.floor(qx / s), math.floor(qy / s)
        ok = True
        for ix in (gx - 1, gx, gx + 1):
            for iy in (gy - 1, gy, gy + 1):
                for v in verts.get((ix, iy), ()):
                    if math.hypot(px[v] - qx, py[v] - qy) < dmin:
                        ok = False
                        break
                if ok:
                    for a, b in mids.get((ix, iy), ()):
                        if in_diametral_xy(px[a], py[a], px[b], py[b], qx, qy) >= 0:
                            ok = False
                            break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            try:
                if _cavity_cuts_interface(g, q, hint):
                    ok = False
                else:
                    v, _, created = g.ms.insert(q, VertexKind.BULK, hint=hint)
                    hint = created[0]
                    rep.reinserted += 1
            except (DuplicatePoint, OutsideHull):
                ok = False
        if not ok:
            keep.append(q)
    g.background = keep


def _repair_edge(g: Interface, a, b, depth=0):
    t = g.tri
    if t.has_edge(a, b):
        return 0
    pa, pb = (t.px[a], t.py[a]), (t.px[b], t.py[b])
    hits = vertices_in_diametral(t, pa, pb, a)
    doomed = [v for v in hits if t.kind[v] == BULK]
    for v in doomed:
        g.background.append((t.px[v], t.py[v]))
        g.ms.remove(v)
    if t.has_edge(a, b):
        return 1
    if depth >= 6:
        raise InterfaceError(f"interface edge ({a}, {b}) could not be recovered")
    mid = (0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]))
    vid = len(t.px)
    g._split(a, b, vid)
    v, _, _ = g.ms.insert(mid, VertexKind.INTERFACE, hint=t.vcell[a])
    assert v == vid
    return 1 + _repair_edge(g, a, v, depth + 1) + _repair_edge(g, v, b, depth + 1)


def _repair_all(g: Interface):
    n = 0
    for a, b in g.edges():
        if b in g.nxt and g.nxt.get(a) == b:
            n += _repair_edge(g, a, b)
    return n


def move_interface(g: Interface, targets, check_omega: bool = True,
                   skip_ensure: bool = False, stop_after_move: bool = False,
                   after_move=None) -> MoveReport:
    """Move interface vertices to their targets while preserving the interface.

    ``targets`` maps vertex ids to points; missing vertices stay put.  Runs
    the Ensure, Move, Coarse and Refine phases and repairs any interface
    edge that went missing.  ``skip_ensure`` disables the Gabriel clearing
    and the repair, and ``stop_after_move`` returns right after the Move
    phase; both exist for negative controls.  ``after_move(g)`` is called
    right after the Move phase (its time is reported as ``fv``).
    """
    t = g.tri
    rep = MoveReport()
    order = g.order()
    targets = {v: (float(targets[v][0]), float(targets[v][1])) for v in order if v in targets}
    dmax = 0.0
    for v, p in targets.items():
        dmax = max(dmax, math.hypot(p[0] - t.px[v], p[1] - t.py[v]))
    rep.max_displacement = dmax
    corners = g.hull_corners()
    for v, p in targets.items():
        for (ax, ay), (bx, by) in corners:
            if orient_xy(ax, ay, bx, by, p[0], p[1]) <= 0:
                raise BoundaryConflict(f"target {p} of vertex {v} leaves the domain")
    if check_omega and dmax > 0:
        rep.omega = omega_mesh(t)
        if dmax >= 0.5 * rep.omega:
            raise MoveTooFar(f"interface displacement {dmax:.3e} >= omega/2 = {0.5 * rep.omega:.3e}")
    pre = np.array([targets.get(v, (t.px[v], t.py[v])) for v in order])

    t0 = time.perf_counter()
    if not skip_ensure:
        _ensure(g, targets, rep)
    t1 = time.perf_counter()
    for v in order:
        p = targets.get(v)
        if p is None or (p[0] == t.px[v] and p[1] == t.py[v]):
            continue
        _, _, in_place = g.ms.move(v, p, check=False)
        rep.moved += 1
        rep.relocated_in_place += bool(in_place)
    t_cb = 0.0
    if after_move is not None:
        tc = time.perf_counter()
        after_move(g)
        t_cb = time.perf_counter() - tc
    if stop_after_move:
        return rep
    if not skip_ensure:
        rep.repairs += _repair_all(g)
    t2 = time.perf_counter()
    _coarse_bulk(g, rep)
    t3 = time.perf_counter()
    _refine_bulk(g, rep)
    t4 = time.perf_counter()
    g.repairs_total += rep.repairs
    rep.timings = {"ensure": t1 - t0, "move": t2 - t1 - t_cb, "coarse-bulk": t3 - t2,
                   "refine-bulk": t4 - t3}
    if after_move is not None:
        rep.timings["fv"] = t_cb
    xs, ys = g.polygon_xy()
    rep.epsilon = one_sided_distance(pre, xs, ys) if dmax > 0 or rep.repairs else 0.0
    g.epsilon_last = rep.epsilon
    return rep


# ----------------------------------------------------------------------
# refinement and coarsening of the interface


def refine_interface(g: Interface) -> int:
    """Split every interface edge longer than dx_gamma_max at its midpoint."""
    t = g.tri
    lmax = g.thresholds.dx_gamma_max
    count = 0
    while True:
        long_edges = [(a, b) for a, b in g.edges()
                      if math.hypot(t.px[b] - t.px[a], t.py[b] - t.py[a]) > lmax]
        if not long_edges:
            break
        for a, b in long_edges:
            mid = (0.5 * (t.px[a] + t.px[b]), 0.5 * (t.py[a] + t.py[b]))
            vid = len(t.px)
            g._split(a, b, vid)
            v, _, _ = g.ms.insert(mid, VertexKind.INTERFACE, hint=t.vcell[a])
            assert v == vid
            count += 1
            g.repairs_total += _repair_edge(g, a, v) + _repair_edge(g, v, b)
    if count:
        g.repairs_total += _repair_all(g)
    return count


def _vertex_key(t, g, v):
    u, w = g.prv[v], g.nxt[v]
    l1 = math.hypot(t.px[v] - t.px[u], t.py[v] - t.py[u])
    l2 = math.hypot(t.px[w] - t.px[v], t.py[w] - t.py[v])
    return min(l1, l2), 0.5 * (l1 + l2)


def coarsen_interface(g: Interface) -> int:
    """Remove interface vertices with a too short incident edge.

    Candidates are processed by ascending average incident edge length.  The
    diametral circle of the two polygon neighbors is cleared of bulk
    vertices first so that the joining edge is Gabriel.  Vertices whose
    circle contains other non-bulk vertices, or whose removal would create
    an edge longer than dx_gamma_max, are left alone.
    """
    t = g.tri
    thr = g.thresholds
    lmin, lmax = thr.dx_gamma_min, thr.dx_gamma_max
    heap = []
    version = defaultdict(int)
    for v in g.order():
        short, avg = _vertex_key(t, g, v)
        if short < lmin:
            heapq.heappush(heap, (avg, v, 0))
    count = 0
    while heap:
        avg, v, ver = heapq.heappop(heap)
        if v not in g.nxt or version[v] != ver:
            continue
        short, avg_now = _vertex_key(t, g, v)
        if short >= lmin:
            continue
        u, w = g.prv[v], g.nxt[v]
        pu, pw = (t.px[u], t.py[u]), (t.px[w], t.py[w])
        if math.hypot(pw[0] - pu[0], pw[1] - pu[1]) > lmax:
            continue
        if len(g) <= 3:
            raise InterfaceError("coarsening would leave fewer than three interface vertices")
        circle = min_covering_circle([pu, pw])
        hits = vertices_in_diametral(t, pu, pw, v)
        if any(t.kind[x] != BULK for x in hits if x not in (u, v, w)):
            continue
        for x in sorted(hits):
            if t.kind[x] == BULK:
                g.background.append((t.px[x], t.py[x]))
                g.ms.remove(x)
        g._join(v)
        g.ms.remove(v)
        count += 1
        if not t.has_edge(u, w):
            raise InterfaceError(f"joining edge ({u}, {w}) is not a mesh edge (circle {circle})")
        for x in (u, w):
            version[x] += 1
            short, a2 = _vertex_key(t, g, x)
            if short < lmin:
                heapq.heappush(heap, (a2, x, version[x]))
    return count


# ----------------------------------------------------------------------
# diagnostics


def interface_edge_mask(t: Triangulation, g: Interface, tri: np.ndarray):
    """Boolean (N, 3) mask: edge opposite local vertex i is an interface edge."""
    n = len(t.px) + 1
    keys = np.array([min(a, b) * n + max(a, b) for a, b in g.edges()], dtype=np.int64)
    mask = np.zeros(tri.shape, dtype=bool)
    for i in range(3):
        a = tri[:, (i + 1) % 3]
        b = tri[:, (i + 2) % 3]
        mask[:, i] = np.isin(np.minimum(a, b) * n + np.maximum(a, b), keys)
    return mask


def phase_labels(g: Interface):
    """Phase of every live cell from connectivity and the winding number.

    Returns ``(slots, labels)``; raises if the interface does not split the
    mesh into exactly two components.
    """
    t = g.tri
    slots, tri, nbr, xy = t.arrays()
    index = np.full(len(t.calive), -1, dtype=np.int64)
    index[slots] = np.arange(len(slots))
    cut = interface_edge_mask(t, g, tri)
    k, i = np.nonzero((nbr >= 0) & ~cut)
    rows = k
    cols = index[nbr[k, i]]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(slots), len(slots)))
    ncomp, comp = connected_components(graph, directed=False)
    if ncomp != 2:
        raise InterfaceError(f"interface splits the mesh into {ncomp} components")
    xs, ys = g.polygon_xy()
    labels = np.empty(len(slots), dtype=np.int64)
    for cid in range(2):
        first = int(np.flatnonzero(comp == cid)[0])
        cx, cy = xy[tri[first]].mean(axis=0)
        labels[comp == cid] = 1 if winding_number(cx, cy, xs, ys) != 0 else 0
    if len(set(labels.tolist())) != 2:
        raise InterfaceError("both components have the same winding number")
    return slots, labels


def refresh_phases(g: Interface):
    slots, labels = phase_labels(g)
    ph = g.tri.cphase
    for s, l in zip(slots.tolist(), labels.tolist()):
        ph[s] = l
    return slots, labels


def interface_measures(g: Interface):
    xs, ys = g.polygon_xy()
    return float(np.sum(g.edge_lengths())), polygon_area(xs, ys), g.epsilon_last


def check_preservation(g: Interface, brute: bool = False):
    """Violations of the interface invariants; empty when preserved.

    Checks that the interface is a closed simple chain of current mesh
    edges between interface vertices, and that no edge between two
    non-interface vertices crosses an interface edge.
    """
    t = g.tri
    out = []
    try:
        order = g.order()
    except InterfaceError as e:
        return [("chain", str(e))]
    if len(order) != len(g.nxt) or len(set(order)) != len(order):
        out.append(("chain", "interface is not a single cycle"))
    if len(order) < 3:
        out.append(("chain", "fewer than three vertices"))
    for v in order:
        if not (0 <= v < len(t.valive)) or not t.valive[v]:
            out.append(("dead-vertex", v))
        elif t.kind[v] != IFACE:
            out.append(("kind", v))
    if out:
        return out
    edges = g.edges()
    missing = [(a, b) for a, b in edges if not t.has_edge(a, b)]
    for e in missing:
        out.append(("missing-edge", e))
    xs, ys = g.polygon_xy()
    for i, j in polygon_self_intersections(xs, ys):
        out.append(("self-intersection", (edges[i], edges[j])))
    suspects = edges if brute else missing
    if suspects:
        kind = np.array(t.kind)
        mesh_edges = np.array([e for e in t.edges() if kind[e[0]] != IFACE and kind[e[1]] != IFACE])
        if len(mesh_edges):
            xy = np.column_stack((t.px, t.py))
            A, B = xy[mesh_edges[:, 0]], xy[mesh_edges[:, 1]]
            lo, hi = np.minimum(A, B), np.maximum(A, B)
            for a, b in suspects:
                pa, pb = xy[a], xy[b]
                elo, ehi = np.minimum(pa, pb), np.maximum(pa, pb)
                cand = np.flatnonzero(np.all(lo <= ehi, axis=1) & np.all(hi >= elo, axis=1))
                for k in cand:
                    p, q = A[k], B[k]
                    if segments_cross_xy(pa[0], pa[1], pb[0], pb[1], p[0], p[1], q[0], q[1]):
                        out.append(("crossing", ((a, b), tuple(mesh_edges[k]))))
    return out


# ----------------------------------------------------------------------
# minimum covering circle property


def verify_theorem_minsphere(trials: int, seed: int = 0, m_max: int = 8, fillers: int = 12):
    """Randomized check that chords through a cleared covering circle are not edges.

    For random sets V, p1 and p2 are drawn outside the minimum covering
    circle M of V on a line through a random point of conv(V); filler
    points are drawn outside M.  The Delaunay triangulation of everything
    must not contain the edge p1 p2.
    """
    rng = random.Random(seed)
    failures = []
    skipped = 0
    for trial in range(trials):
        m = rng.randint(2, m_max)
        V = [(rng.random(), rng.random()) for _ in range(m)]
        M = min_covering_circle(V)
        cx, cy = M.center
        r = math.sqrt(M.radius_squared)
        w = [rng.random() for _ in range(m)]
        sw = sum(w)
        qx = sum(wi * v[0] for wi, v in zip(w, V)) / sw
        qy = sum(wi * v[1] for wi, v in zip(w, V)) / sw
        th = rng.uniform(0, 2 * math.pi)
        dx, dy = math.cos(th), math.sin(th)
        # line q + s d meets M at s = -b +- sqrt(b^2 - c)
        bq = dx * (qx - cx) + dy * (qy - cy)
        cq = (qx - cx) ** 2 + (qy - cy) ** 2 - r * r
        root = math.sqrt(max(0.0, bq * bq - cq))
        s1 = -bq + root + r * rng.uniform(0.01, 2.0)
        s2 = -bq - root - r * rng.uniform(0.01, 2.0)
        p1 = (qx + s1 * dx, qy + s1 * dy)
        p2 = (qx + s2 * dx, qy + s2 * dy)
        pts = V + [p1, p2]
        while len(pts) < m + 2 + fillers:
            f = (cx + rng.uniform(-4, 4) * r, cy + rng.uniform(-4, 4) * r)
            if (f[0] - cx) ** 2 + (f[1] - cy) ** 2 > r * r * (1 + 1e-9):
                pts.append(f)
        try:
            t = build(pts)
        except MeshError:
            skipped += 1
            continue
        if t.has_edge(m, m + 1):
            failures.append(trial)
    return {"trials": trials, "failures": len(failures), "failed_trials": failures,
            "skipped": skipped}
