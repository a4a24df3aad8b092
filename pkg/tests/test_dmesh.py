import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipmm.dmesh import (
    GHOST,
    OUTSIDE_HULL,
    BoundaryVertex,
    DuplicatePoint,
    MeshError,
    OutsideHull,
    VertexKind,
    build,
    validate_delaunay,
)
from ipmm.geom import in_circle, orient2d


def random_points(n, seed):
    rng = random.Random(seed)
    return [(rng.random(), rng.random()) for _ in range(n)]


def geometry_set(t):
    return {tuple(sorted(t.cell_points(c))) for c in t.cells()}


def box_mesh(n=40, seed=0):
    pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)] + [
        (0.05 + 0.9 * x, 0.05 + 0.9 * y) for x, y in random_points(n, seed)]
    return build(pts)


def flip(t, s, i):
    """Flip the edge opposite local vertex i of cell s (test-only surgery)."""
    cv, cn = t.cv, t.cn
    b = 3 * s
    p, a, bb = cv[b + i], cv[b + (i + 1) % 3], cv[b + (i + 2) % 3]
    n = cn[b + i]
    na, nb_ = cn[b + (i + 1) % 3], cn[b + (i + 2) % 3]
    k = [cv[3 * n + j] for j in range(3)]
    j = next(j for j in range(3) if k[j] not in (a, bb))
    q = k[j]
    # n is ccw (q, b, a) starting from q
    assert cv[3 * n + (j + 1) % 3] == bb
    ma, mb = cn[3 * n + (j + 2) % 3], cn[3 * n + (j + 1) % 3]
    cv[b:b + 3] = type(cv)("q", [p, a, q])
    cn[b:b + 3] = type(cn)("q", [mb, n, nb_])
    cv[3 * n:3 * n + 3] = type(cv)("q", [q, bb, p])
    cn[3 * n:3 * n + 3] = type(cn)("q", [na, s, ma])
    for c, old, new in ((mb, n, s), (na, s, n)):
        for r in range(3):
            if cn[3 * c + r] == old:
                cn[3 * c + r] = new
    t.vcell[a] = s
    t.vcell[p] = s
    t.vcell[bb] = n
    t.vcell[q] = n


# -- build ------------------------------------------------------------


def test_build_square():
    t = build([(0, 0), (1, 0), (1, 1), (0, 1.0000001)])
    assert t.n_cells == 2 == 2 * 4 - 4 - 2
    assert validate_delaunay(t) == []
    assert all(t.kind[v] == VertexKind.BOUNDARY for v in t.vertices())


def test_build_random_valid_and_euler():
    t = build(random_points(200, 1))
    assert validate_delaunay(t, brute=True) == []
    assert t.n_cells == 2 * 200 - len(t.hull_vertices()) - 2


def test_build_errors():
    with pytest.raises(MeshError):
        build([(0, 0), (1, 1)])
    with pytest.raises(MeshError):
        build([(0, 0), (1, 1), (2, 2)])
    with pytest.raises(DuplicatePoint):
        build([(0, 0), (1, 0), (0, 1), (1, 0)])
    with pytest.raises(MeshError):
        build([(0, 0), (1, 0), (0, math.nan)])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=3, max_size=60, unique=True))
def test_build_property(pts):
    try:
        t = build(pts)
    except MeshError:
        # all collinear input is the only legitimate failure
        assert all(orient2d(pts[0], pts[1], p) == 0 for p in pts[2:]) or \
            len({tuple(p) for p in pts}) < 3
        return
    assert validate_delaunay(t, brute=True) == []
    hull = len(t.hull_vertices())
    assert t.n_cells == 2 * len(pts) - hull - 2


# -- locate and conflict zone -----------------------------------------


def test_locate_centroid_and_outside():
    t = build(random_points(100, 2))
    for c in t.cells():
        (ax, ay), (bx, by), (cx, cy) = t.cell_points(c)
        assert t.locate(((ax + bx + cx) / 3, (ay + by + cy) / 3)) == c
    assert t.locate((5.0, 5.0)) is OUTSIDE_HULL
    assert not t.locate((-3.0, 0.5))


def test_locate_random_points_contained():
    t = box_mesh(80, 3)
    rng = random.Random(4)
    for _ in range(1000):
        p = (rng.random(), rng.random())
        c = t.locate(p)
        a, b, q = t.cell_points(c)
        assert orient2d(a, b, p) >= 0 and orient2d(b, q, p) >= 0 and orient2d(q, a, p) >= 0


def scan_conflicts(t, p):
    return {c for c in t.cells() if in_circle(*t.cell_points(c), p) >= 0}


def test_conflict_zone_matches_scan():
    rng = random.Random(5)
    for trial in range(100):
        t = box_mesh(30, trial)
        for _ in range(5):
            p = (rng.uniform(0.001, 0.999), rng.uniform(0.001, 0.999))
            assert t.conflict_zone(p) == scan_conflicts(t, p)


def test_conflict_zone_circumcenter_and_cocircular():
    from ipmm.geom import circumcircle

    t = box_mesh(20, 12)
    checked = 0
    for c in t.cells():
        cc = circumcircle(*t.cell_points(c)).center
        if not (0.01 < cc.x < 0.99 and 0.01 < cc.y < 0.99):
            continue
        zone = t.conflict_zone(cc)
        assert c in zone and zone == scan_conflicts(t, cc)
        checked += 1
    assert checked > 10
    # cocircular diamond inside a box: a point on the shared circle hits both
    # diamond cells (inside-or-on rule)
    diamond = [(5, 0), (0, 5), (-5, 0), (0, -5.0)]
    sq = build([(-15, -15), (15, -15), (15, 15), (-15, 15)] + diamond)
    inner = [c for c in sq.cells()
             if all(p in [tuple(map(float, d)) for d in diamond] for p in sq.cell_points(c))]
    assert len(inner) == 2
    # (3, 4) lies exactly on the radius 5 circle
    zone = sq.conflict_zone((3.0, 4.0))
    assert set(inner) <= zone and zone == scan_conflicts(sq, (3.0, 4.0))
    with pytest.raises(OutsideHull):
        sq.conflict_zone((20, 5))


# -- insert / remove --------------------------------------------------


def test_insert_centroid_single_triangle():
    t = build([(0, 0), (1, 0), (0, 1)])
    (c0,) = t.cells()
    v, created, destroyed = t.insert((1 / 3, 1 / 3))
    assert destroyed == [c0] and len(created) == 3
    assert t.kind[v] == VertexKind.BULK
    assert validate_delaunay(t) == []


def test_insert_area_bookkeeping_and_sequence():
    t = box_mesh(0, 0)
    rng = random.Random(6)
    for _ in range(500):
        p = (rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99))
        before = {c: t.cell_area(c) for c in t.cells()}
        v, created, destroyed = t.insert(p)
        a_old = sum(before[c] for c in destroyed)
        a_new = sum(t.cell_area(c) for c in created)
        assert a_new == pytest.approx(a_old, rel=1e-10)
    assert validate_delaunay(t, brute=True) == []
    assert t.total_area() == pytest.approx(1.0, rel=1e-10)


def test_insert_errors():
    t = box_mesh(10, 1)
    with pytest.raises(OutsideHull):
        t.insert((1.5, 0.5))
    with pytest.raises(OutsideHull):
        t.insert((0.5, 0.0))
    with pytest.raises(DuplicatePoint):
        t.insert(t.position(5))


def test_remove_fan_center():
    outer = [(0, 0), (1, 0.1), (1.1, 1), (-0.1, 0.9)]
    t = build(outer + [(0.5, 0.5)])
    created, destroyed = t.remove(4)
    assert len(destroyed) == 4 and len(created) == 2
    assert geometry_set(t) == geometry_set(build(outer))


def test_remove_reinsert_restores_complex():
    t = box_mesh(60, 7)
    ref = geometry_set(t)
    rng = random.Random(8)
    interior = [v for v in t.vertices() if t.kind[v] != VertexKind.BOUNDARY]
    for v in rng.sample(interior, 20):
        p = t.position(v)
        t.remove(v)
        w, _, _ = t.insert(p)
        assert w != v
        assert geometry_set(t) == ref


def test_random_removals_valid():
    t = box_mesh(120, 9)
    rng = random.Random(10)
    interior = [v for v in t.vertices() if t.kind[v] != VertexKind.BOUNDARY]
    rng.shuffle(interior)
    for v in interior:
        created, destroyed = t.remove(v)
        assert sum(t.cell_area(c) for c in created) > 0
        assert validate_delaunay(t) == []
    assert t.n_cells == 2
    assert t.total_area() == pytest.approx(1.0, rel=1e-10)


def test_boundary_vertices_protected():
    t = box_mesh(10, 2)
    for v in range(4):
        with pytest.raises(BoundaryVertex):
            t.remove(v)
        with pytest.raises(BoundaryVertex):
            t.move(v, (0.5, 0.5))


def test_stale_cell_handles():
    t = box_mesh(10, 3)
    c = t.cells()[0]
    ref = t.cell_ref(c)
    assert t.is_current(ref)
    a, b, q = t.cell_points(c)
    t.insert(((a[0] + b[0] + q[0]) / 3, (a[1] + b[1] + q[1]) / 3))
    assert not t.is_current(ref)
    with pytest.raises(MeshError):
        t.vertex(10 ** 6)


def test_vertex_ids_not_reused():
    t = box_mesh(10, 4)
    v = 7
    p = t.position(v)
    t.remove(v)
    w, _, _ = t.insert(p)
    assert w != v
    with pytest.raises(MeshError):
        t.vertex(v)


# -- move -------------------------------------------------------------


def test_move_in_place_and_topological():
    t = box_mesh(50, 11)
    v = 10
    p = t.position(v)
    created, destroyed, relocated = t.move(v, (p.x + 1e-9, p.y))
    assert relocated and not created and not destroyed
    assert validate_delaunay(t) == []
    created, destroyed, relocated = t.move(v, (0.5, 0.5))
    assert t.position(v) == (0.5, 0.5)
    assert validate_delaunay(t, brute=True) == []
    assert t.total_area() == pytest.approx(1.0, rel=1e-10)


# -- validator --------------------------------------------------------


def test_validate_flipped_diagonal():
    t = build([(0, 0), (1, 0), (1.1, 1.2), (0, 1)])
    assert validate_delaunay(t) == []
    s = t.cells()[0]
    i = next(i for i in range(3) if not t.cghost[t.cn[3 * s + i]])
    flip(t, s, i)
    bad = validate_delaunay(t)
    assert sorted(x for k, x in bad if k == "delaunay") == sorted(t.cells())
    assert [k for k, _ in bad] == ["delaunay", "delaunay"]
    assert sorted(x for k, x in validate_delaunay(t, brute=True)) == sorted(t.cells())


def test_validate_detects_orientation_and_bookkeeping():
    t = box_mesh(10, 5)
    c = t.cells()[0]
    t.cv[3 * c], t.cv[3 * c + 1] = t.cv[3 * c + 1], t.cv[3 * c]
    kinds = {k for k, _ in validate_delaunay(t)}
    assert "orientation" in kinds


def test_ghost_layout():
    t = box_mesh(5, 6)
    hull = t.hull_vertices()
    assert hull == {0, 1, 2, 3}
    for c in range(len(t.calive)):
        if t.calive[c] and t.cghost[c]:
            assert t.cv[3 * c + 2] == GHOST


# -- stress -----------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_mixed_operations_stay_delaunay(seed):
    rng = random.Random(seed)
    t = box_mesh(15, seed)
    for _ in range(60):
        interior = [v for v in t.vertices() if t.kind[v] != VertexKind.BOUNDARY]
        r = rng.random()
        try:
            if r < 0.4 or len(interior) < 3:
                t.insert((rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99)))
            elif r < 0.7:
                t.remove(rng.choice(interior))
            else:
                v = rng.choice(interior)
                p = t.position(v)
                s = rng.choice((1e-9, 1e-3, 0.1))
                t.move(v, (min(0.99, max(0.01, p.x + rng.uniform(-s, s))),
                           min(0.99, max(0.01, p.y + rng.uniform(-s, s)))))
        except (DuplicatePoint, OutsideHull):
            continue
        assert validate_delaunay(t) == []
    assert t.total_area() == pytest.approx(1.0, rel=1e-10)
