"""Moving mesh: triangulation operations that carry piecewise-constant data.

Every topological operation replaces a stencil of old cells by new cells
covering the same region.  The data on the new cells is obtained from the
old ones either by local averaging (mass over area) or by an L2 projection
computed from exact triangle-triangle overlaps.

Cells carry a phase label when an interface is present.  Transfers are then
done phase by phase, so mass never leaks across the interface, and each
phase's mass is conserved exactly up to rounding.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dmesh import GHOST, BoundaryVertex, MeshError, Triangulation, VertexKind
from .geom import point_segment_distance, winding_number


class ProjectionKind(str, enum.Enum):
    AVERAGE = "average"
    L2 = "l2"


class ProjectionError(MeshError):
    pass


class MoveTooFar(MeshError):
    """A vertex was asked to move at least its admissible distance."""


@dataclass
class Stencil:
    """Detached copy of a set of cells: geometry, data and phase."""

    tris: list
    data: np.ndarray
    phase: list
    slots: list
    verts: list | None = None

    @property
    def areas(self):
        return [_tri_area(t) for t in self.tris]


def _tri_area(t):
    (ax, ay), (bx, by), (cx, cy) = t
    return 0.5 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def snapshot(t: Triangulation, cells) -> Stencil:
    cells = list(cells)
    cv = t.cv
    return Stencil([t.cell_points(c) for c in cells], t.data[cells],
                   [t.cphase[c] for c in cells], cells,
                   [(cv[3 * c], cv[3 * c + 1], cv[3 * c + 2]) for c in cells])


# ----------------------------------------------------------------------
# omega


def omega_vertex(t: Triangulation, v: int) -> float:
    """Distance from v to the boundary of its star."""
    x, y = t.px[v], t.py[v]
    best = math.inf
    cv, px, py = t.cv, t.px, t.py
    for c, i in t.star(v):
        a = cv[3 * c + (i + 1) % 3]
        b = cv[3 * c + (i + 2) % 3]
        if a == GHOST or b == GHOST:
            continue
        best = min(best, point_segment_distance((x, y), (px[a], py[a]), (px[b], py[b])))
    return best


def _cell_omega(tri, xy, hull):
    """Per cell, the smallest distance from a non-hull corner to its opposite edge."""
    best = np.full(len(tri), np.inf)
    for i in range(3):
        v = tri[:, i]
        p = xy[v]
        a = xy[tri[:, (i + 1) % 3]]
        b = xy[tri[:, (i + 2) % 3]]
        ab = b - a
        L2 = np.einsum("ij,ij->i", ab, ab)
        s = np.clip(np.einsum("ij,ij->i", p - a, ab) / L2, 0.0, 1.0)
        d = p - (a + s[:, None] * ab)
        d = np.sqrt(np.einsum("ij,ij->i", d, d))
        best = np.minimum(best, np.where(hull[v], np.inf, d))
    return best


def omega_mesh(t: Triangulation) -> float:
    """Minimum of omega_vertex over vertices not on the hull.

    Per-cell values are cached on the triangulation and refreshed only for
    slots created or deformed since the previous call.
    """
    cap = len(t.calive)
    cv = np.frombuffer(t.cv, dtype=np.int64).reshape(cap, 3)
    xy = np.column_stack((np.frombuffer(t.px), np.frombuffer(t.py)))
    hull = t.hull_vertex_mask()
    hull_ids = np.flatnonzero(hull)
    cache = getattr(t, "_omega_cells", None)
    if cache is None or not np.array_equal(getattr(t, "_omega_hull", None), hull_ids):
        cache = np.full(cap, np.inf)
        todo = np.arange(cap)
    else:
        if len(cache) < cap:
            cache = np.concatenate((cache, np.full(cap - len(cache), np.inf)))
        todo = np.fromiter(t.touched, dtype=np.int64, count=len(t.touched))
    t.touched.clear()
    live = (np.frombuffer(t.calive, dtype=np.int8) != 0) & (np.frombuffer(t.cghost, dtype=np.int8) == 0)
    if len(todo):
        todo = todo[live[todo]]
        cache[todo] = _cell_omega(cv[todo], xy, hull)
    t._omega_cells = cache
    t._omega_hull = hull_ids
    vals = cache[live]
    return float(vals.min()) if len(vals) else math.inf


# ----------------------------------------------------------------------
# projections


def clip_triangle(subject, clip):
    """Intersection polygon of two counterclockwise triangles."""
    poly = list(subject)
    for k in range(3):
        ax, ay = clip[k]
        bx, by = clip[(k + 1) % 3]
        ex, ey = bx - ax, by - ay
        out = []
        n = len(poly)
        if n == 0:
            break
        prev = poly[-1]
        sp = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in poly:
            sc = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if sc >= 0:
                if sp < 0:
                    r = sp / (sp - sc)
                    out.append((prev[0] + r * (cur[0] - prev[0]), prev[1] + r * (cur[1] - prev[1])))
                out.append(cur)
            elif sp >= 0:
                r = sp / (sp - sc)
                out.append((prev[0] + r * (cur[0] - prev[0]), prev[1] + r * (cur[1] - prev[1])))
            prev, sp = cur, sc
        poly = out
    return poly


def polygon_area_list(poly):
    n = len(poly)
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _bbox(t):
    xs = (t[0][0], t[1][0], t[2][0])
    ys = (t[0][1], t[1][1], t[2][1])
    return min(xs), max(xs), min(ys), max(ys)


def overlap_matrix(new_tris, old_tris):
    W = np.zeros((len(new_tris), len(old_tris)))
    ob = [_bbox(t) for t in old_tris]
    for i, nt in enumerate(new_tris):
        x0, x1, y0, y1 = _bbox(nt)
        for j, ot in enumerate(old_tris):
            a0, a1, b0, b1 = ob[j]
            if a0 >= x1 or a1 <= x0 or b0 >= y1 or b1 <= y0:
                continue
            W[i, j] = max(0.0, polygon_area_list(clip_triangle(nt, ot)))
    return W


def project_average(old: Stencil, new_tris) -> np.ndarray:
    """Mass of the old stencil spread uniformly over the new cells."""
    a_old = np.array(old.areas)
    a_new = np.array([_tri_area(t) for t in new_tris])
    if a_new.sum() <= 0:
        raise ProjectionError("new stencil has no area")
    mean = (old.data * a_old[:, None]).sum(axis=0) / a_new.sum()
    return np.tile(mean, (len(new_tris), 1))


def project_l2(old: Stencil, new_tris, rtol: float = 1e-6) -> np.ndarray:
    """Area-weighted mean of the old data restricted to each new cell."""
    a_new = np.array([_tri_area(t) for t in new_tris])
    W = overlap_matrix(new_tris, old.tris)
    covered = W.sum(axis=1)
    if np.any(np.abs(covered - a_new) > rtol * np.maximum(a_new, 1e-300)):
        raise ProjectionError("stencils do not cover the same region")
    return (W @ old.data) / covered[:, None]


def _phase_groups(phases):
    groups = {}
    for i, p in enumerate(phases):
        groups.setdefault(p, []).append(i)
    return groups


def transfer(old: Stencil, new_tris, new_phase, kind: ProjectionKind) -> np.ndarray:
    """Phase-protected, conservative transfer from an old to a new stencil.

    When both stencils carry the same set of phases, each phase's mass is
    redistributed only onto new cells of that phase.  Otherwise the whole
    stencil is treated as one phase.
    """
    a_old = np.array(old.areas)
    a_new = np.array([_tri_area(t) for t in new_tris])
    gold = _phase_groups(old.phase)
    gnew = _phase_groups(new_phase)
    if set(gold) != set(gnew):
        gold = {0: list(range(len(old.tris)))}
        gnew = {0: list(range(len(new_tris)))}
        same = None
    else:
        same = True
    m = old.data.shape[1]
    out = np.empty((len(new_tris), m))
    if kind == ProjectionKind.L2:
        W = overlap_matrix(new_tris, old.tris)
    for p, inew in gnew.items():
        iold = gold[p]
        mass = (old.data[iold] * a_old[iold, None]).sum(axis=0)
        area_new = a_new[inew].sum()
        if kind == ProjectionKind.AVERAGE:
            out[inew] = mass / area_new
            continue
        Wp = W[np.ix_(inew, iold)]
        wsum = Wp.sum(axis=1)
        vals = Wp @ old.data[iold]
        mean = mass / a_old[iold].sum()
        ok = wsum > 1e-12 * a_new[inew]
        v = np.where(ok[:, None], vals / np.where(ok, wsum, 1.0)[:, None], mean)
        v += (mass - (v * a_new[inew, None]).sum(axis=0)) / area_new
        out[inew] = v
    return out


def keep_transfer(old: Stencil, new_tris, new_phase, kind: ProjectionKind) -> np.ndarray:
    """Transfer across a pure deformation (same cells, moved vertex).

    Local averaging keeps each cell's value and restores every phase's mass
    with a uniform additive correction; the L2 kind uses the overlap-based
    transfer.
    """
    if kind == ProjectionKind.L2:
        return transfer(old, new_tris, new_phase, kind)
    a_old = np.array(old.areas)
    a_new = np.array([_tri_area(t) for t in new_tris])
    out = old.data.copy()
    for p, idx in _phase_groups(old.phase).items():
        mass = (old.data[idx] * a_old[idx, None]).sum(axis=0)
        now = (old.data[idx] * a_new[idx, None]).sum(axis=0)
        out[idx] += (mass - now) / a_new[idx].sum()
    return out


# ----------------------------------------------------------------------
# state


class MeshState:
    """A triangulation with cell data, cell phases and interface bookkeeping.

    ``iface_dir`` holds directed interface edges ``(a, b)`` with phase 1 on
    their left.  It is used to label cells created by an operation; labels
    that cannot be resolved locally fall back to a point-in-polygon test
    against ``polygon()``.

    ``deform`` selects how moves treat the data.  ``"keep"`` keeps values on
    in-place moves with a per-phase mass correction.  ``"ale"`` leaves the
    data referring to the geometry before the moves: in-place moves keep
    values untouched and other moves project in that geometry, using the old
    positions recorded in ``track`` (a dict).  A transport step must then
    finish the motion, see ``sim.upwind_update``.
    """

    def __init__(self, tri: Triangulation, kind=ProjectionKind.AVERAGE):
        self.tri = tri
        self.kind = ProjectionKind(kind)
        self.iface_dir: set = set()
        self.polygon = None
        self.phase_fallbacks = 0
        self.deform = "keep"
        self.track = None
        for c in tri.cells():
            if tri.cphase[c] < 0:
                tri.cphase[c] = 0

    # -- phases -----------------------------------------------------

    def _region_phase(self, c):
        if self.polygon is None:
            return 0
        self.phase_fallbacks += 1
        xs, ys = self.polygon()
        (ax, ay), (bx, by), (cx, cy) = self.tri.cell_points(c)
        return 1 if winding_number((ax + bx + cx) / 3, (ay + by + cy) / 3, xs, ys) != 0 else 0

    def label_cells(self, cells):
        t = self.tri
        cv, cn, ghost, phase = t.cv, t.cn, t.cghost, t.cphase
        idir = self.iface_dir
        pending = set(cells)
        for c in pending:
            phase[c] = -1
        verdict = {}
        if not idir:
            for c in pending:
                phase[c] = 0
            return
        conflict = set()
        changed = True
        while changed:
            changed = False
            for c in pending:
                if c in verdict and c not in conflict:
                    continue
                b = 3 * c
                vals = set()
                for i in range(3):
                    a = cv[b + (i + 1) % 3]
                    w = cv[b + (i + 2) % 3]
                    if (a, w) in idir:
                        vals.add(1)
                    elif (w, a) in idir:
                        vals.add(0)
                    else:
                        n = cn[b + i]
                        if not ghost[n]:
                            p = verdict.get(n, phase[n]) if n in pending else phase[n]
                            if p >= 0:
                                vals.add(p)
                if len(vals) == 1:
                    if c not in verdict:
                        verdict[c] = vals.pop()
                        changed = True
                elif len(vals) > 1:
                    conflict.add(c)
        for c in pending:
            if c in verdict and c not in conflict:
                phase[c] = verdict[c]
            else:
                phase[c] = self._region_phase(c)

    # -- operations -------------------------------------------------

    def _apply(self, old: Stencil, created, deform=False):
        t = self.tri
        if not created:
            return
        if not deform:
            self.label_cells(created)
        new_tris = [t.cell_points(c) for c in created]
        new_phase = [t.cphase[c] for c in created]
        if deform:
            vals = keep_transfer(old, new_tris, new_phase, self.kind)
        else:
            vals = transfer(old, new_tris, new_phase, self.kind)
        t.data[created] = vals

    def _keep_average(self, old: Stencil):
        # same computation as keep_transfer, in plain floats for small stars
        t = self.tri
        rows = old.data.tolist()
        a_old = old.areas
        a_new = [t.cell_area(c) for c in old.slots]
        m = len(rows[0])
        groups = {}
        for k, ph in enumerate(old.phase):
            groups.setdefault(ph, []).append(k)
        out = [list(r) for r in rows]
        for idx in groups.values():
            area = sum(a_new[k] for k in idx)
            for j in range(m):
                mass = 0.0
                now = 0.0
                for k in idx:
                    mass += rows[k][j] * a_old[k]
                    now += rows[k][j] * a_new[k]
                corr = (mass - now) / area
                for k in idx:
                    out[k][j] = rows[k][j] + corr
        t.data[old.slots] = out

    def insert(self, p, kind=VertexKind.BULK, hint=None):
        t = self.tri
        olds = []
        v, created, destroyed = t.insert(p, kind, hint=hint,
                                         capture=lambda cells: olds.append(snapshot(t, cells)))
        self._apply(olds[0], created)
        return v, olds[0], created

    def remove(self, v):
        t = self.tri
        olds = []
        created, destroyed = t.remove(v, capture=lambda cells: olds.append(snapshot(t, cells)))
        self._apply(olds[0], created)
        return olds[0], created

    def move(self, v, p, check: bool = True):
        """Relocate v to p.  Returns ``(old_stencil, new_cells, relocated)``.

        With ``check`` the move must be shorter than omega_vertex(v).
        """
        t = self.tri
        star = t.star(v)
        ghost = t.cghost
        if t.kind[v] == VertexKind.BOUNDARY or any(ghost[c] for c, _ in star):
            raise BoundaryVertex(f"vertex {v} is a boundary vertex")
        x, y = float(p[0]), float(p[1])
        if check:
            d = math.hypot(x - t.px[v], y - t.py[v])
            om = omega_vertex(t, v)
            if d >= om:
                raise MoveTooFar(f"move of {d:.3e} exceeds omega {om:.3e} at vertex {v}")
        cells = [c for c, _ in star]
        star_old = snapshot(t, cells)
        if self.track is not None:
            self.track.setdefault(v, (t.px[v], t.py[v]))
        if t.try_relocate(v, x, y, star):
            if self.deform == "ale":
                pass
            elif self.kind == ProjectionKind.AVERAGE:
                self._keep_average(star_old)
            else:
                self._apply(star_old, cells, deform=True)
            return star_old, cells, True
        pieces = []
        created, destroyed, _ = t.move(v, (x, y), capture=lambda cells: pieces.append(snapshot(t, cells)),
                                       relocate=False)
        old = _merge(pieces)
        if self.deform == "ale":
            self.label_cells(created)
            self._apply_virtual(old, created)
        else:
            self._apply(old, created)
        return old, created, False

    def _apply_virtual(self, old: Stencil, created):
        # transfer in the geometry before this step's moves
        t = self.tri
        track = self.track or {}

        def pos(w):
            return track.get(w) or (t.px[w], t.py[w])

        old_v = Stencil([tuple(pos(w) for w in tv) for tv in old.verts], old.data, old.phase,
                        old.slots, old.verts)
        cv = t.cv
        new_tris = [tuple(pos(w) for w in cv[3 * c:3 * c + 3]) for c in created]
        new_phase = [t.cphase[c] for c in created]
        kind = self.kind
        if kind == ProjectionKind.L2 and (min(old_v.areas) <= 0
                                          or min(_tri_area(q) for q in new_tris) <= 0):
            kind = ProjectionKind.AVERAGE
        t.data[created] = transfer(old_v, new_tris, new_phase, kind)


def _merge(pieces):
    tris, phase, slots, verts = [], [], [], []
    for s in pieces:
        tris += s.tris
        phase += s.phase
        slots += s.slots
        verts += s.verts or []
    data = np.concatenate([s.data for s in pieces]) if pieces else np.zeros((0, 1))
    return Stencil(tris, data, phase, slots, verts)


def total_mass(t: Triangulation, phase=None) -> np.ndarray:
    slots, tri, _, xy = t.arrays()
    a, b, c = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    d = t.data[slots]
    if phase is not None:
        ph = np.array(t.cphase)[slots]
        keep = ph == phase
        d, area = d[keep], area[keep]
    return (d * area[:, None]).sum(axis=0)
