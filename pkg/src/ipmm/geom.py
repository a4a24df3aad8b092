"""Robust 2D predicates and circle constructions.

``orient2d`` and ``in_circle`` are exact: a floating-point evaluation is
accepted when it clears a forward error bound, otherwise the determinant is
recomputed with rational arithmetic.  Everything else (circumcenters, radii,
covering circles) is ordinary floating point.

The ``*_xy`` variants take raw coordinates and return plain ints; they are
what the mesh kernels call in their inner loops.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence


class GeometryError(ValueError):
    """Degenerate input to a construction (collinear triangle, empty set, ...)."""


class Point2(NamedTuple):
    x: float
    y: float


class Orientation(enum.IntEnum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


@dataclass(frozen=True)
class Circle:
    center: Point2
    radius_squared: float

    def __post_init__(self):
        if self.radius_squared < 0:
            raise GeometryError("negative squared radius")

    def contains(self, p, slack=0.0) -> bool:
        """Inside-or-on test with an absolute slack on the squared radius."""
        dx = p[0] - self.center[0]
        dy = p[1] - self.center[1]
        return dx * dx + dy * dy <= self.radius_squared + slack


# Shewchuk's stage-A error bounds
_EPS = 2.0 ** -53
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def orient_exact(ax, ay, bx, by, cx, cy) -> int:
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    ax, ay, bx, by, cx, cy, dx, dy = map(Fraction, (ax, ay, bx, by, cx, cy, dx, dy))
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdx * cdy - cdx * bdy)
           + blift * (cdx * ady - adx * cdy)
           + clift * (adx * bdy - bdx * ady))
    return _sign(det)


def orient_xy(ax, ay, bx, by, cx, cy) -> int:
    """Sign of twice the signed area of (a, b, c); +1 for counterclockwise."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    bound = _CCW_BOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return orient_exact(ax, ay, bx, by, cx, cy)


def incircle_xy(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """+1 if d is strictly inside the circle through counterclockwise a, b, c."""
    adx = ax - dx
    ady = ay - dy
    bdx = bx - dx
    bdy = by - dy
    cdx = cx - dx
    cdy = cy - dy
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    cdxady = cdx * ady
    adxcdy = adx * cdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdxcdy - cdxbdy)
           + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    bound = _ICC_BOUND * permanent
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def in_diametral_xy(ax, ay, bx, by, px, py) -> int:
    """+1 strictly inside, 0 on, -1 outside the circle with diameter ab.

    Uses the sign of (a - p).(b - p), which is negative exactly inside.
    """
    ux, uy = ax - px, ay - py
    vx, vy = bx - px, by - py
    t1 = ux * vx
    t2 = uy * vy
    dot = t1 + t2
    bound = 4.0 * _EPS * (abs(t1) + abs(t2))
    if dot < -bound:
        return 1
    if dot > bound:
        return -1
    ax, ay, bx, by, px, py = map(Fraction, (ax, ay, bx, by, px, py))
    return -_sign((ax - px) * (bx - px) + (ay - py) * (by - py))


def orient2d(a, b, c) -> Orientation:
    return Orientation(orient_xy(a[0], a[1], b[0], b[1], c[0], c[1]))


def in_circle(a, b, c, p) -> Orientation:
    """Exact position of p relative to the circumcircle of ccw (a, b, c).

    POSITIVE: strictly inside, ZERO: on the circle, NEGATIVE: outside.
    """
    if orient_xy(a[0], a[1], b[0], b[1], c[0], c[1]) == 0:
        raise GeometryError("in_circle on a collinear triangle")
    return Orientation(incircle_xy(a[0], a[1], b[0], b[1], c[0], c[1], p[0], p[1]))


def circumcenter_xy(ax, ay, bx, by, cx, cy):
    bx -= ax
    by -= ay
    cx -= ax
    cy -= ay
    d = 2.0 * (bx * cy - by * cx)
    if d == 0.0:
        raise GeometryError("circumcircle of collinear points")
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return ax + ux, ay + uy, ux * ux + uy * uy


def circumcircle(a, b, c) -> Circle:
    if orient_xy(a[0], a[1], b[0], b[1], c[0], c[1]) == 0:
        raise GeometryError("circumcircle of collinear points")
    x, y, r2 = circumcenter_xy(a[0], a[1], b[0], b[1], c[0], c[1])
    return Circle(Point2(x, y), r2)


def gabriel_circle(a, b) -> Circle:
    """Smallest circle through both endpoints of a segment."""
    if a[0] == b[0] and a[1] == b[1]:
        raise GeometryError("Gabriel circle of a degenerate segment")
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    return Circle(Point2(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])),
                  0.25 * (dx * dx + dy * dy))


def _covers(circle, p, eps=1e-12):
    cx, cy, r2 = circle
    dx = p[0] - cx
    dy = p[1] - cy
    return dx * dx + dy * dy <= r2 * (1.0 + eps) + 1e-300


def _diam(p, q):
    cx = 0.5 * (p[0] + q[0])
    cy = 0.5 * (p[1] + q[1])
    dx = p[0] - cx
    dy = p[1] - cy
    return cx, cy, dx * dx + dy * dy


def _circle3(p, q, r):
    try:
        return circumcenter_xy(p[0], p[1], q[0], q[1], r[0], r[1])
    except GeometryError:
        # collinear: the two extreme points span the answer
        best = max(((p, q), (p, r), (q, r)),
                   key=lambda s: (s[0][0] - s[1][0]) ** 2 + (s[0][1] - s[1][1]) ** 2)
        return _diam(*best)


def min_covering_circle_support(points: Sequence, seed: int = 0x5EC):
    """Smallest enclosing circle and the indices of the points defining it.

    Randomized incremental construction (move-to-front style, expected
    linear time) with a fixed shuffle seed so results are reproducible.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise GeometryError("minimum covering circle of an empty set")
    order = list(range(len(pts)))
    random.Random(seed).shuffle(order)

    i0 = order[0]
    circle = (pts[i0][0], pts[i0][1], 0.0)
    support = (i0,)
    for n, i in enumerate(order):
        if n == 0 or _covers(circle, pts[i]):
            continue
        circle = (pts[i][0], pts[i][1], 0.0)
        support = (i,)
        for m in range(n):
            j = order[m]
            if _covers(circle, pts[j]):
                continue
            circle = _diam(pts[i], pts[j])
            support = (i, j)
            for l in range(m):
                k = order[l]
                if _covers(circle, pts[k]):
                    continue
                circle = _circle3(pts[i], pts[j], pts[k])
                support = (i, j, k)
    cx, cy, r2 = circle
    return Circle(Point2(cx, cy), r2), tuple(sorted(support))


def min_covering_circle(points: Sequence) -> Circle:
    return min_covering_circle_support(points)[0]


def _on_segment(px, py, qx, qy, rx, ry):
    # r collinear with pq: is it within the bounding box of pq
    return min(px, qx) <= rx <= max(px, qx) and min(py, qy) <= ry <= max(py, qy)


def segments_intersect_xy(p1x, p1y, p2x, p2y, q1x, q1y, q2x, q2y) -> bool:
    o1 = orient_xy(p1x, p1y, p2x, p2y, q1x, q1y)
    o2 = orient_xy(p1x, p1y, p2x, p2y, q2x, q2y)
    o3 = orient_xy(q1x, q1y, q2x, q2y, p1x, p1y)
    o4 = orient_xy(q1x, q1y, q2x, q2y, p2x, p2y)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    # touching and overlapping configurations count as intersections
    if o1 == 0 and _on_segment(p1x, p1y, p2x, p2y, q1x, q1y):
        return True
    if o2 == 0 and _on_segment(p1x, p1y, p2x, p2y, q2x, q2y):
        return True
    if o3 == 0 and _on_segment(q1x, q1y, q2x, q2y, p1x, p1y):
        return True
    if o4 == 0 and _on_segment(q1x, q1y, q2x, q2y, p2x, p2y):
        return True
    return False


def segments_properly_intersect(p1, p2, q1, q2) -> bool:
    """Whether two closed segments share a point (endpoint contact included)."""
    if (p1[0] == p2[0] and p1[1] == p2[1]) or (q1[0] == q2[0] and q1[1] == q2[1]):
        raise GeometryError("degenerate segment")
    return segments_intersect_xy(p1[0], p1[1], p2[0], p2[1],
                                 q1[0], q1[1], q2[0], q2[1])


def triangle_area_xy(ax, ay, bx, by, cx, cy) -> float:
    return 0.5 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def insphere_diameter(a, b, c) -> float:
    """Incircle diameter 2A/s, with s the semiperimeter."""
    area = abs(triangle_area_xy(a[0], a[1], b[0], b[1], c[0], c[1]))
    if orient_xy(a[0], a[1], b[0], b[1], c[0], c[1]) == 0:
        raise GeometryError("insphere of a collinear triangle")
    s = 0.5 * (math.dist(a, b) + math.dist(b, c) + math.dist(c, a))
    return 2.0 * area / s


def point_segment_distance(p, a, b) -> float:
    ax, ay = a[0], a[1]
    dx = b[0] - ax
    dy = b[1] - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return math.dist(p, a)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / l2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def polygon_area(xs, ys) -> float:
    """Signed shoelace area; positive for counterclockwise vertex order."""
    n = len(xs)
    s = 0.0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        s += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * s


def winding_number(px, py, xs, ys) -> int:
    """Winding number of a closed polygon around (px, py)."""
    wn = 0
    n = len(xs)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        if ys[i] <= py:
            if ys[j] > py and orient_xy(xs[i], ys[i], xs[j], ys[j], px, py) > 0:
                wn += 1
        elif ys[j] <= py and orient_xy(xs[i], ys[i], xs[j], ys[j], px, py) < 0:
            wn -= 1
    return wn


def segments_cross_xy(p1x, p1y, p2x, p2y, q1x, q1y, q2x, q2y) -> bool:
    """Whether two segments cross at a single point interior to both."""
    o1 = orient_xy(p1x, p1y, p2x, p2y, q1x, q1y)
    o2 = orient_xy(p1x, p1y, p2x, p2y, q2x, q2y)
    if o1 * o2 >= 0:
        return False
    o3 = orient_xy(q1x, q1y, q2x, q2y, p1x, p1y)
    o4 = orient_xy(q1x, q1y, q2x, q2y, p2x, p2y)
    return o3 * o4 < 0
