"""Incremental 2D Delaunay triangulation.

Storage is a set of slot arenas held in flat Python lists: cell ``s`` owns
``cv[3s:3s+3]`` (vertex ids, counterclockwise) and ``cn[3s:3s+3]`` (the
neighbor opposite each vertex).  The convex hull is closed off by *ghost*
cells ``(u, w, GHOST)``, one per hull edge, so every finite cell has three
neighbors and walks/cavities need no special casing at the boundary.

Vertex ids are never reused.  Cell slots are recycled; every slot carries a
generation counter that is bumped when the cell dies, so ``(slot, gen)``
references can be checked for staleness with :meth:`Triangulation.is_current`.
"""
from __future__ import annotations

import enum
import math
import random
from array import array
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geom import (
    GeometryError,
    Point2,
    incircle_exact,
    incircle_xy,
    orient_exact,
    orient_xy,
    triangle_area_xy,
)

GHOST = -1

_EPS = 2.0 ** -53
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


class VertexKind(enum.IntEnum):
    BULK = 0
    INTERFACE = 1
    BOUNDARY = 2


class MeshError(ValueError):
    pass


class DuplicatePoint(MeshError):
    pass


class OutsideHull(MeshError):
    pass


class BoundaryVertex(MeshError):
    pass


class _Outside:
    def __repr__(self):
        return "OUTSIDE_HULL"

    def __bool__(self):
        return False


OUTSIDE_HULL = _Outside()


@dataclass(frozen=True)
class VertexRecord:
    id: int
    position: Point2
    kind: VertexKind


@dataclass(frozen=True)
class CellRecord:
    id: int
    vertices: tuple
    neighbors: tuple
    data: np.ndarray


class Triangulation:
    def __init__(self, m: int = 1, seed: int = 1):
        self.m = m
        # flat typed arenas, so numpy can read them without conversion
        self.px = array("d")
        self.py = array("d")
        self.kind = array("b")
        self.valive = array("b")
        self.vcell = array("q")
        self.cv = array("q")
        self.cn = array("q")
        self.calive = array("b")
        self.cghost = array("b")
        self.cgen = array("q")
        self.cphase = array("q")
        self.free: list[int] = []
        # slots created or deformed since a cache last looked (see omega_mesh)
        self.touched: set[int] = set()
        self.data = np.zeros((64, m))
        self.n_vertices = 0
        self.n_cells = 0
        self.last = 0
        self.hull_area = 0.0
        self._rng = random.Random(seed)

    # ------------------------------------------------------------------
    # records and simple queries

    def vertex(self, v: int) -> VertexRecord:
        self._check_vertex(v)
        return VertexRecord(v, Point2(self.px[v], self.py[v]), VertexKind(self.kind[v]))

    def cell(self, c: int) -> CellRecord:
        if not self.is_cell(c):
            raise MeshError(f"no live cell {c}")
        b = 3 * c
        nb = tuple(-1 if self.cghost[n] else n for n in self.cn[b:b + 3])
        return CellRecord(c, tuple(self.cv[b:b + 3]), nb, self.data[c].copy())

    def is_cell(self, c: int) -> bool:
        return 0 <= c < len(self.calive) and self.calive[c] and not self.cghost[c]

    def cell_ref(self, c: int):
        return (c, self.cgen[c])

    def is_current(self, ref) -> bool:
        c, gen = ref
        return self.is_cell(c) and self.cgen[c] == gen

    def position(self, v: int) -> Point2:
        return Point2(self.px[v], self.py[v])

    def vertices(self):
        return [v for v, alive in enumerate(self.valive) if alive]

    def cells(self):
        alive, ghost = self.calive, self.cghost
        return [c for c in range(len(alive)) if alive[c] and not ghost[c]]

    def cell_points(self, c: int):
        b = 3 * c
        px, py, cv = self.px, self.py, self.cv
        a, bb, cc = cv[b], cv[b + 1], cv[b + 2]
        return ((px[a], py[a]), (px[bb], py[bb]), (px[cc], py[cc]))

    def cell_area(self, c: int) -> float:
        b = 3 * c
        px, py, cv = self.px, self.py, self.cv
        a, bb, cc = cv[b], cv[b + 1], cv[b + 2]
        return triangle_area_xy(px[a], py[a], px[bb], py[bb], px[cc], py[cc])

    def _check_vertex(self, v):
        if not (0 <= v < len(self.valive)) or not self.valive[v]:
            raise MeshError(f"unknown vertex {v}")

    def star(self, v: int):
        """Cells around v in counterclockwise order, with v's local index."""
        c0 = self.vcell[v]
        cv, cn = self.cv, self.cn
        out = []
        c = c0
        while True:
            b = 3 * c
            i = 0 if cv[b] == v else (1 if cv[b + 1] == v else 2)
            out.append((c, i))
            c = cn[b + (i + 1) % 3]
            if c == c0:
                return out
            if len(out) > 100000:
                raise MeshError("corrupt vertex star")

    def incident_cells(self, v: int):
        return [c for c, _ in self.star(v) if not self.cghost[c]]

    def adjacent_vertices(self, v: int):
        cv = self.cv
        res = []
        for c, i in self.star(v):
            w = cv[3 * c + (i + 1) % 3]
            if w != GHOST:
                res.append(w)
        return res

    def is_hull_vertex(self, v: int) -> bool:
        ghost = self.cghost
        return any(ghost[c] for c, _ in self.star(v))

    def has_edge(self, a: int, b: int) -> bool:
        if not (0 <= a < len(self.valive)) or not self.valive[a]:
            return False
        cv = self.cv
        for c, i in self.star(a):
            if cv[3 * c + (i + 1) % 3] == b:
                return True
        return False

    def edges(self):
        """Unique finite edges as (a, b) with a < b."""
        cv, cn, alive, ghost = self.cv, self.cn, self.calive, self.cghost
        out = []
        for c in range(len(alive)):
            if not alive[c] or ghost[c]:
                continue
            b = 3 * c
            for i in range(3):
                n = cn[b + i]
                if ghost[n] or n > c:
                    out.append((cv[b + (i + 1) % 3], cv[b + (i + 2) % 3]))
        return out

    def hull_vertices(self):
        cv, alive, ghost = self.cv, self.calive, self.cghost
        hv = set()
        for c in range(len(alive)):
            if alive[c] and ghost[c]:
                hv.add(cv[3 * c])
                hv.add(cv[3 * c + 1])
        return hv

    # ------------------------------------------------------------------
    # arena management

    def _new_vertex(self, x, y, kind, vid=None):
        if vid is None:
            vid = len(self.px)
            self.px.append(x)
            self.py.append(y)
            self.kind.append(int(kind))
            self.valive.append(True)
            self.vcell.append(-1)
        else:
            self.px[vid] = x
            self.py[vid] = y
            self.valive[vid] = True
        self.n_vertices += 1
        return vid

    def _new_cell(self, a, b, c):
        if self.free:
            s = self.free.pop()
            self.touched.add(s)
            k = 3 * s
            self.cv[k] = a
            self.cv[k + 1] = b
            self.cv[k + 2] = c
            self.calive[s] = True
            self.cghost[s] = c == GHOST
            self.cphase[s] = -1
        else:
            s = len(self.calive)
            self.touched.add(s)
            self.cv.extend((a, b, c))
            self.cn.extend((-2, -2, -2))
            self.calive.append(True)
            self.cghost.append(c == GHOST)
            self.cgen.append(0)
            self.cphase.append(-1)
            if s >= self.data.shape[0]:
                grown = np.zeros((2 * self.data.shape[0], self.m))
                grown[: self.data.shape[0]] = self.data
                self.data = grown
        return s

    def _kill_cell(self, s):
        self.calive[s] = False
        self.cgen[s] += 1
        self.free.append(s)

    # ------------------------------------------------------------------
    # conflicts and location

    def _ghost_conflict(self, s, x, y):
        b = 3 * s
        u, w = self.cv[b], self.cv[b + 1]
        px, py = self.px, self.py
        o = orient_xy(px[u], py[u], px[w], py[w], x, y)
        if o > 0:
            return True
        if o < 0:
            return False
        ux, uy, wx, wy = map(Fraction, (px[u], py[u], px[w], py[w]))
        fx, fy = Fraction(x), Fraction(y)
        return ((fx - ux) * (wx - ux) + (fy - uy) * (wy - uy) > 0
                and (fx - wx) * (ux - wx) + (fy - wy) * (uy - wy) > 0)

    def _incircle_cell(self, s, x, y):
        b = 3 * s
        cv, px, py = self.cv, self.px, self.py
        a, bb, c = cv[b], cv[b + 1], cv[b + 2]
        return incircle_xy(px[a], py[a], px[bb], py[bb], px[c], py[c], x, y)

    def _walk(self, x, y, start):
        """Remembering stochastic visibility walk; may end in a ghost cell."""
        cv, cn, px, py, ghost = self.cv, self.cn, self.px, self.py, self.cghost
        c = start
        if ghost[c]:
            c = cn[3 * c + 2]
        rnd = self._rng.random
        prev = -1
        steps = 0
        while True:
            steps += 1
            if steps > 10 * (self.n_cells + 10):
                raise MeshError("point location did not terminate")
            b = 3 * c
            off = int(rnd() * 3)
            moved = False
            for k in range(3):
                i = (off + k) % 3
                n = cn[b + i]
                if n == prev:
                    continue
                u = cv[b + (i + 1) % 3]
                w = cv[b + (i + 2) % 3]
                ux, uy, wx, wy = px[u], py[u], px[w], py[w]
                detleft = (ux - x) * (wy - y)
                detright = (uy - y) * (wx - x)
                det = detleft - detright
                bound = _CCW_BOUND * (abs(detleft) + abs(detright))
                if det < -bound or (-bound <= det <= bound
                                    and orient_exact(ux, uy, wx, wy, x, y) < 0):
                    prev = c
                    c = n
                    moved = True
                    break
            if not moved:
                return c
            if ghost[c]:
                return c

    def _start_cell(self, hint=None):
        if hint is not None and 0 <= hint < len(self.calive) and self.calive[hint]:
            return hint
        if 0 <= self.last < len(self.calive) and self.calive[self.last]:
            return self.last
        for s, alive in enumerate(self.calive):
            if alive:
                return s
        raise MeshError("empty triangulation")

    def locate(self, p, hint=None):
        """A finite cell containing p, or ``OUTSIDE_HULL``.

        Points on an edge shared by two cells resolve to the lower cell id.
        """
        x, y = float(p[0]), float(p[1])
        c = self._walk(x, y, self._start_cell(hint))
        if self.cghost[c]:
            return OUTSIDE_HULL
        b = 3 * c
        cv, cn, px, py = self.cv, self.cn, self.px, self.py
        best = c
        for i in range(3):
            u = cv[b + (i + 1) % 3]
            w = cv[b + (i + 2) % 3]
            if orient_xy(px[u], py[u], px[w], py[w], x, y) == 0:
                n = cn[b + i]
                if not self.cghost[n] and n < best:
                    best = n
        self.last = c
        return best

    def conflict_zone(self, p, hint=None):
        """All finite cells whose circumcircle contains p inside or on it."""
        x, y = float(p[0]), float(p[1])
        c = self._walk(x, y, self._start_cell(hint))
        if self.cghost[c]:
            raise OutsideHull(f"{p} lies outside the hull")
        cn, ghost = self.cn, self.cghost
        zone = {c}
        stack = [c]
        seen = {c}
        while stack:
            s = stack.pop()
            b = 3 * s
            for i in range(3):
                n = cn[b + i]
                if n in seen:
                    continue
                seen.add(n)
                if ghost[n]:
                    continue
                if self._incircle_cell(n, x, y) >= 0:
                    zone.add(n)
                    stack.append(n)
        return zone

    # ------------------------------------------------------------------
    # insertion

    def _cavity(self, x, y, start):
        cn, ghost = self.cn, self.cghost
        cavity = [start]
        status = {start: True}
        stack = [start]
        while stack:
            s = stack.pop()
            b = 3 * s
            for i in range(3):
                n = cn[b + i]
                if n in status:
                    continue
                if ghost[n]:
                    hit = self._ghost_conflict(n, x, y)
                else:
                    hit = self._incircle_cell(n, x, y) > 0
                status[n] = hit
                if hit:
                    cavity.append(n)
                    stack.append(n)
        return cavity, status

    def _insert_at(self, x, y, kind, start, vid=None, capture=None):
        """Bowyer-Watson insertion starting from a cell in conflict with (x, y)."""
        cavity, status = self._cavity(x, y, start)
        cv, cn, ghost = self.cv, self.cn, self.cghost
        px, py = self.px, self.py
        boundary = []
        for s in cavity:
            b = 3 * s
            for i in range(3):
                n = cn[b + i]
                if status.get(n):
                    continue
                u = cv[b + (i + 1) % 3]
                w = cv[b + (i + 2) % 3]
                if u != GHOST and w != GHOST:
                    if orient_xy(px[u], py[u], px[w], py[w], x, y) <= 0:
                        raise MeshError("insertion cavity is not star-shaped")
                nb = 3 * n
                j = 0 if cn[nb] == s else (1 if cn[nb + 1] == s else 2)
                boundary.append((u, w, n, j))

        destroyed = [s for s in cavity if not ghost[s]]
        if capture is not None:
            capture(destroyed)

        v = self._new_vertex(x, y, kind, vid)
        for s in cavity:
            if not ghost[s]:
                self.n_cells -= 1
            self._kill_cell(s)

        new_cells = []
        by_first = {}
        by_second = {}
        for u, w, n, j in boundary:
            if u == GHOST:
                s = self._new_cell(w, v, GHOST)
                rot = 2
            else:
                s = self._new_cell(v, u, w)
                rot = 0
            new_cells.append((s, u, w, n, j, rot))
            by_first[u] = s
            by_second[w] = s
        created = []
        for s, u, w, n, j, rot in new_cells:
            # logical layout (v, u, w); neighbors opposite v, u, w
            nb_v = n
            nb_u = by_first[w]
            nb_w = by_second[u]
            b = 3 * s
            if rot == 0:
                cn[b] = nb_v
                cn[b + 1] = nb_u
                cn[b + 2] = nb_w
                if w != GHOST:
                    created.append(s)
                    self.n_cells += 1
                    self.vcell[w] = s
                self.vcell[u] = s
            else:
                # stored as (w, v, u=GHOST)
                cn[b] = nb_w
                cn[b + 1] = nb_v
                cn[b + 2] = nb_u
                self.vcell[w] = s
            cn[3 * n + j] = s
        self.vcell[v] = created[0] if created else new_cells[0][0]
        if created:
            self.last = created[0]
        return v, created, destroyed

    def insert(self, p, kind=VertexKind.BULK, hint=None, capture=None):
        """Insert a point strictly inside the hull.

        Returns ``(vertex_id, created_cells, destroyed_cells)``.
        """
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MeshError("non-finite coordinates")
        c = self._walk(x, y, self._start_cell(hint))
        if self.cghost[c]:
            raise OutsideHull(f"({x}, {y}) lies outside the hull")
        self._check_insertable(c, x, y)
        return self._insert_at(x, y, kind, c, capture=capture)

    def _check_insertable(self, c, x, y):
        b = 3 * c
        cv, cn, px, py, ghost = self.cv, self.cn, self.px, self.py, self.cghost
        for i in range(3):
            a = cv[b + i]
            if px[a] == x and py[a] == y:
                raise DuplicatePoint(f"({x}, {y}) is already a vertex")
        for i in range(3):
            if ghost[cn[b + i]]:
                u = cv[b + (i + 1) % 3]
                w = cv[b + (i + 2) % 3]
                if orient_xy(px[u], py[u], px[w], py[w], x, y) == 0:
                    raise OutsideHull(f"({x}, {y}) lies on the hull boundary")

    # ------------------------------------------------------------------
    # removal

    def remove(self, v: int, capture=None):
        """Remove an interior vertex and retriangulate its hole.

        Returns ``(created_cells, destroyed_cells)``.
        """
        self._check_vertex(v)
        if self.kind[v] == VertexKind.BOUNDARY:
            raise BoundaryVertex(f"vertex {v} is a boundary vertex")
        star = self.star(v)
        ghost = self.cghost
        for c, _ in star:
            if ghost[c]:
                raise BoundaryVertex(f"vertex {v} lies on the hull")
        destroyed = [c for c, _ in star]
        if capture is not None:
            capture(destroyed)
        created = self._retriangulate_hole(v, star)
        return created, destroyed

    def _retriangulate_hole(self, v, star):
        cv, cn, px, py = self.cv, self.cn, self.px, self.py
        link = []
        outer = []
        for c, i in star:
            b = 3 * c
            link.append(cv[b + (i + 1) % 3])
            n = cn[b + i]
            nb = 3 * n
            j = 0 if cn[nb] == c else (1 if cn[nb + 1] == c else 2)
            outer.append((n, j))
        k = len(link)
        vx, vy = px[v], py[v]

        for c, _ in star:
            self._kill_cell(c)
        self.valive[v] = False
        self.n_vertices -= 1
        self.n_cells -= k

        nxt = list(range(1, k)) + [0]
        prv = [k - 1] + list(range(k - 1))
        alive = [True] * k
        created = []
        count = k
        head = 0

        def link_cell(s, local, out):
            n, j = out
            cn[3 * s + local] = n
            cn[3 * n + j] = s

        def is_delaunay_ear(i, j, l):
            a, b, c = link[i], link[j], link[l]
            ax, ay, bx, by, cx, cy = px[a], py[a], px[b], py[b], px[c], py[c]
            t = nxt[l]
            while t != i:
                w = link[t]
                if w != a and w != c and incircle_xy(ax, ay, bx, by, cx, cy, px[w], py[w]) > 0:
                    return False
                t = nxt[t]
            return True

        while count > 3:
            best = None
            best_pow = math.inf
            i = head
            for _ in range(count):
                j = nxt[i]
                l = nxt[j]
                a, b, c = link[i], link[j], link[l]
                if orient_xy(px[a], py[a], px[b], py[b], px[c], py[c]) > 0:
                    try:
                        cx_, cy_, r2 = _circum(px[a], py[a], px[b], py[b], px[c], py[c])
                        pw = (vx - cx_) ** 2 + (vy - cy_) ** 2 - r2
                    except ZeroDivisionError:
                        pw = math.inf
                    if pw < best_pow or best is None:
                        best_pow = pw
                        best = i
                i = j
            if best is None or not is_delaunay_ear(best, nxt[best], nxt[nxt[best]]):
                best = None
                i = head
                for _ in range(count):
                    j = nxt[i]
                    l = nxt[j]
                    a, b, c = link[i], link[j], link[l]
                    if (orient_xy(px[a], py[a], px[b], py[b], px[c], py[c]) > 0
                            and is_delaunay_ear(i, j, l)):
                        best = i
                        break
                    i = j
                if best is None:
                    raise MeshError("hole retriangulation found no Delaunay ear")
            i = best
            j = nxt[i]
            l = nxt[j]
            s = self._new_cell(link[i], link[j], link[l])
            link_cell(s, 0, outer[j])
            link_cell(s, 2, outer[i])
            outer[i] = (s, 1)
            nxt[i] = l
            prv[l] = i
            alive[j] = False
            count -= 1
            head = i
            created.append(s)
        i = head
        j = nxt[i]
        l = nxt[j]
        a, b, c = link[i], link[j], link[l]
        if orient_xy(px[a], py[a], px[b], py[b], px[c], py[c]) <= 0:
            raise MeshError("hole retriangulation produced an inverted cell")
        s = self._new_cell(a, b, c)
        link_cell(s, 0, outer[j])
        link_cell(s, 1, outer[l])
        link_cell(s, 2, outer[i])
        created.append(s)
        self.n_cells += len(created)
        vcell = self.vcell
        for s in created:
            b3 = 3 * s
            vcell[cv[b3]] = s
            vcell[cv[b3 + 1]] = s
            vcell[cv[b3 + 2]] = s
        self.last = created[-1]
        return created

    # ------------------------------------------------------------------
    # motion

    def try_relocate(self, v: int, x: float, y: float, star=None) -> bool:
        """Move v in place if the connectivity stays valid and Delaunay.

        Returns False (and leaves the mesh untouched) when a topology change
        is required.  ``star`` may pass in a precomputed ``star(v)``.
        """
        cv, cn, px, py, ghost = self.cv, self.cn, self.px, self.py, self.cghost
        if star is None:
            star = self.star(v)
        for c, _ in star:
            if ghost[c]:
                return False
        for c, i in star:
            b = 3 * c
            a = cv[b + (i + 1) % 3]
            w = cv[b + (i + 2) % 3]
            if orient_xy(x, y, px[a], py[a], px[w], py[w]) <= 0:
                return False
        for c, i in star:
            b = 3 * c
            a = cv[b + (i + 1) % 3]
            w = cv[b + (i + 2) % 3]
            ax, ay, wx, wy = px[a], py[a], px[w], py[w]
            # link edge (a, w): opposite vertex of the outer cell
            n = cn[b + i]
            if not ghost[n]:
                nb = 3 * n
                o = cv[nb] if cv[nb] != a and cv[nb] != w else (
                    cv[nb + 1] if cv[nb + 1] != a and cv[nb + 1] != w else cv[nb + 2])
                if incircle_xy(x, y, ax, ay, wx, wy, px[o], py[o]) > 0:
                    return False
            # spoke (v, w): opposite vertex in the next cell around v
            n2 = cn[b + (i + 1) % 3]
            nb = 3 * n2
            o = cv[nb] if cv[nb] != v and cv[nb] != w else (
                cv[nb + 1] if cv[nb + 1] != v and cv[nb + 1] != w else cv[nb + 2])
            if incircle_xy(x, y, ax, ay, wx, wy, px[o], py[o]) > 0:
                return False
        px[v] = x
        py[v] = y
        self.touched.update(c for c, _ in star)
        return True

    def move(self, v: int, p, capture=None, relocate: bool = True):
        """Relocate vertex v to p, keeping its id.

        Returns ``(created, destroyed, relocated)``.  When the move does not
        change connectivity, ``relocated`` holds the deformed star cells and
        the created/destroyed lists are empty.  ``relocate=False`` skips the
        in-place attempt.
        """
        self._check_vertex(v)
        if self.kind[v] == VertexKind.BOUNDARY:
            raise BoundaryVertex(f"vertex {v} is a boundary vertex")
        x, y = float(p[0]), float(p[1])
        if relocate and self.try_relocate(v, x, y):
            return [], [], self.incident_cells(v)
        if self.is_hull_vertex(v):
            raise BoundaryVertex(f"vertex {v} lies on the hull")
        start = self.vcell[v]
        c = self._walk(x, y, start)
        if self.cghost[c]:
            raise OutsideHull(f"({x}, {y}) lies outside the hull")
        self._check_insertable(c, x, y)

        created1_set = set()

        def cap_insert(cells):
            capture([s for s in cells if s not in created1_set])

        kind = self.kind[v]
        created1, destroyed1 = self.remove(v, capture=capture)
        created1_set.update(created1)
        c = self._walk(x, y, created1[0])
        if self.cghost[c]:
            raise MeshError("relocation target left the hull")
        self._check_insertable(c, x, y)
        _, created2, destroyed2 = self._insert_at(
            x, y, kind, c, vid=v, capture=cap_insert if capture is not None else None)
        d2 = set(destroyed2)
        destroyed = list(destroyed1) + [s for s in destroyed2 if s not in created1_set]
        created = list(created2) + [s for s in created1 if s not in d2]
        return created, destroyed, []

    # ------------------------------------------------------------------
    # arrays

    def arrays(self):
        """Numpy views of the live finite cells.

        Returns ``(slots, tri, nbr, xy)``: cell slots, their vertex ids
        (N, 3), neighbor slots (N, 3) with -1 across the hull, and the full
        vertex coordinate table.
        """
        cap = len(self.calive)
        cv = np.frombuffer(self.cv, dtype=np.int64).reshape(cap, 3)
        cn = np.frombuffer(self.cn, dtype=np.int64).reshape(cap, 3)
        alive = np.frombuffer(self.calive, dtype=np.int8).astype(bool)
        ghost = np.frombuffer(self.cghost, dtype=np.int8).astype(bool)
        live = alive & ~ghost
        slots = np.flatnonzero(live)
        nbr = cn[slots]
        nbr = np.where(ghost[nbr], -1, nbr)
        xy = np.column_stack((np.frombuffer(self.px), np.frombuffer(self.py)))
        return slots, cv[slots], nbr, xy

    def hull_vertex_mask(self) -> np.ndarray:
        """Boolean mask over vertex ids of the vertices on the convex hull."""
        cap = len(self.calive)
        cv = np.frombuffer(self.cv, dtype=np.int64).reshape(cap, 3)
        alive = np.frombuffer(self.calive, dtype=np.int8).astype(bool)
        ghost = np.frombuffer(self.cghost, dtype=np.int8).astype(bool)
        mask = np.zeros(len(self.px), dtype=bool)
        # ghost cells store the hull edge in their first two slots
        mask[cv[alive & ghost, :2].ravel()] = True
        return mask

    def total_area(self) -> float:
        slots, tri, _, xy = self.arrays()
        a, b, c = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
        return float(0.5 * np.sum((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])))


def _circum(ax, ay, bx, by, cx, cy):
    bx -= ax
    by -= ay
    cx -= ax
    cy -= ay
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return ax + ux, ay + uy, ux * ux + uy * uy


# ----------------------------------------------------------------------
# construction


def _snake_order(xs, ys):
    n = len(xs)
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    rows = max(1, int(math.sqrt(n / 2.0)))
    h = (y1 - y0) / rows or 1.0

    def key(i):
        r = min(rows - 1, int((ys[i] - y0) / h))
        return (r, xs[i] if r % 2 == 0 else -xs[i])

    return sorted(range(n), key=key)


def build(points, kinds=None, m: int = 1, seed: int = 1) -> Triangulation:
    """Delaunay triangulation of a point set.

    ``points`` is a sequence of (x, y) pairs, or of ((x, y), kind) pairs when
    ``kinds`` is omitted and the first entry is nested.  Vertex ids equal the
    input indices.  Hull vertices are marked ``BOUNDARY``.
    """
    pts = list(points)
    if pts and kinds is None and isinstance(pts[0], tuple) and len(pts[0]) == 2 \
            and isinstance(pts[0][0], (tuple, list, Point2)):
        kinds = [k for _, k in pts]
        pts = [p for p, _ in pts]
    n = len(pts)
    if n < 3:
        raise MeshError("need at least three points")
    xs = [float(p[0]) for p in pts]
    ys = [float(p[1]) for p in pts]
    if not all(math.isfinite(v) for v in xs + ys):
        raise MeshError("non-finite coordinates")
    if len(set(zip(xs, ys))) != n:
        raise DuplicatePoint("duplicate points in input")
    if kinds is None:
        kinds = [VertexKind.BULK] * n

    order = _snake_order(xs, ys)
    a, b = order[0], order[1]
    third = None
    for k in order[2:]:
        if orient_xy(xs[a], ys[a], xs[b], ys[b], xs[k], ys[k]) != 0:
            third = k
            break
    if third is None:
        raise MeshError("all input points are collinear")

    t = Triangulation(m=m, seed=seed)
    t.px = array("d", xs)
    t.py = array("d", ys)
    t.kind = array("b", [int(k) for k in kinds])
    t.valive = array("b", bytes(n))
    t.vcell = array("q", [-1]) * n
    c = third
    if orient_xy(xs[a], ys[a], xs[b], ys[b], xs[c], ys[c]) < 0:
        b, c = c, b
    for v in (a, b, c):
        t.valive[v] = True
    t.n_vertices = 3
    cells = [(a, b, c), (b, a, GHOST), (c, b, GHOST), (a, c, GHOST)]
    slots = [t._new_cell(*tri) for tri in cells]
    edge_owner = {}
    for s, tri in zip(slots, cells):
        for i in range(3):
            edge_owner[(tri[(i + 1) % 3], tri[(i + 2) % 3])] = (s, i)
    for s, tri in zip(slots, cells):
        for i in range(3):
            t.cn[3 * s + i] = edge_owner[(tri[(i + 2) % 3], tri[(i + 1) % 3])][0]
    t.n_cells = 1
    t.vcell[a] = t.vcell[b] = t.vcell[c] = slots[0]
    t.last = slots[0]

    for k in order:
        if t.valive[k]:
            continue
        x, y = xs[k], ys[k]
        s = t._walk(x, y, t._start_cell())
        if not t.cghost[s]:
            bb = 3 * s
            for i in range(3):
                w = t.cv[bb + i]
                if xs[w] == x and ys[w] == y:
                    raise DuplicatePoint(f"({x}, {y}) duplicated")
        t._insert_at(x, y, t.kind[k], s, vid=k)

    for v in t.hull_vertices():
        t.kind[v] = int(VertexKind.BOUNDARY)
    t.hull_area = t.total_area()
    return t


# ----------------------------------------------------------------------
# validation


def _incircle_batch(a, b, c, d):
    """Float in-circle determinants and Shewchuk permanents, row-wise."""
    adx, ady = a[:, 0] - d[:, 0], a[:, 1] - d[:, 1]
    bdx, bdy = b[:, 0] - d[:, 0], b[:, 1] - d[:, 1]
    cdx, cdy = c[:, 0] - d[:, 0], c[:, 1] - d[:, 1]
    bc1, bc2 = bdx * cdy, cdx * bdy
    ca1, ca2 = cdx * ady, adx * cdy
    ab1, ab2 = adx * bdy, bdx * ady
    al = adx * adx + ady * ady
    bl = bdx * bdx + bdy * bdy
    cl = cdx * cdx + cdy * cdy
    det = al * (bc1 - bc2) + bl * (ca1 - ca2) + cl * (ab1 - ab2)
    perm = ((np.abs(bc1) + np.abs(bc2)) * al + (np.abs(ca1) + np.abs(ca2)) * bl
            + (np.abs(ab1) + np.abs(ab2)) * cl)
    return det, _ICC_BOUND * perm


def _exact_signs(det, bound, rows, fn):
    sign = np.sign(det).astype(np.int64)
    unsure = np.flatnonzero(np.abs(det) <= bound)
    for k in unsure:
        sign[k] = fn(*rows(k))
    return sign


def validate_delaunay(t: Triangulation, brute: bool = False):
    """List of invariant violations; empty for a valid Delaunay mesh.

    Checks positive orientation, neighbor symmetry, vertex bookkeeping, the
    Euler relation and the empty-circumcircle property.  The Delaunay check
    is edge-local by default (equivalent for a valid triangulation of the
    hull); ``brute=True`` scans every vertex against every circumcircle.
    Violations are ``(kind, item)`` tuples; Delaunay violations name cells.
    """
    out = []
    slots, tri, nbr, xy = t.arrays()
    if len(slots) == 0:
        return [("empty", None)]
    a, b, c = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]

    dl = (a[:, 0] - c[:, 0]) * (b[:, 1] - c[:, 1])
    dr = (a[:, 1] - c[:, 1]) * (b[:, 0] - c[:, 0])
    det = dl - dr
    bound = _CCW_BOUND * (np.abs(dl) + np.abs(dr))
    osign = _exact_signs(det, bound, lambda k: (*a[k], *b[k], *c[k]), orient_exact)
    for k in np.flatnonzero(osign <= 0):
        out.append(("orientation", int(slots[k])))

    cap = len(t.calive)
    cn = np.array(t.cn, dtype=np.int64).reshape(cap, 3)
    cv = np.array(t.cv, dtype=np.int64).reshape(cap, 3)
    alive = np.array(t.calive, dtype=bool)
    full_nbr = cn[slots]
    if not alive[full_nbr].all():
        for k, i in zip(*np.nonzero(~alive[full_nbr])):
            out.append(("dead-neighbor", int(slots[k])))
        return out
    back = cn[full_nbr]  # (N, 3, 3)
    sym = (back == slots[:, None, None]).any(axis=2)
    for k, i in zip(*np.nonzero(~sym)):
        out.append(("asymmetric-neighbor", int(slots[k])))

    # vertex bookkeeping
    vids = np.unique(tri)
    alive_v = np.flatnonzero(np.array(t.valive, dtype=bool))
    if len(vids) != len(alive_v) or not np.array_equal(vids, alive_v):
        out.append(("orphan-vertices", sorted(set(alive_v.tolist()) ^ set(vids.tolist()))))
    if len(slots) != t.n_cells or len(alive_v) != t.n_vertices:
        out.append(("counts", (len(slots), t.n_cells, len(alive_v), t.n_vertices)))
    nh = len(t.hull_vertices())
    if len(slots) != 2 * len(alive_v) - nh - 2:
        out.append(("euler", (len(slots), len(alive_v), nh)))

    bad = set()
    if brute:
        pts = xy[alive_v]
        for k in range(len(slots)):
            d = pts
            m = len(d)
            det, bnd = _incircle_batch(np.repeat(a[k:k + 1], m, 0), np.repeat(b[k:k + 1], m, 0),
                                       np.repeat(c[k:k + 1], m, 0), d)
            cand = np.flatnonzero(det > -bnd)
            for j in cand:
                v = alive_v[j]
                if v in tri[k]:
                    continue
                if incircle_xy(*a[k], *b[k], *c[k], *d[j]) > 0:
                    bad.add(int(slots[k]))
                    break
    else:
        ghost = np.array(t.cghost, dtype=bool)
        kk, ii = np.nonzero(~ghost[full_nbr])
        ns = full_nbr[kk, ii]
        nverts = cv[ns]
        shared = tri[kk]
        opp_mask = ~(nverts[:, :, None] == shared[:, None, :]).any(axis=2)
        opp = nverts[np.arange(len(ns)), np.argmax(opp_mask, axis=1)]
        d = xy[opp]
        det, bnd = _incircle_batch(a[kk], b[kk], c[kk], d)
        hits = np.flatnonzero(det > -bnd)
        for h in hits:
            if det[h] > bnd[h] or incircle_xy(*a[kk[h]], *b[kk[h]], *c[kk[h]], *d[h]) > 0:
                bad.add(int(slots[kk[h]]))
    for s in sorted(bad):
        out.append(("delaunay", s))
    return out
