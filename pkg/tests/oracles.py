"""Independent reference implementations used to cross-check the library.

These deliberately take brute-force routes (exhaustive containment,
flood fill, permutation search, compensated summation) so they share no
code path with the implementations they verify.
"""
from collections import deque
from itertools import combinations, permutations

import numpy as np


def brute_hull_vertices(pts):
    """A point is a hull vertex iff it is not a convex combination of the
    others (checked against every segment and triangle)."""
    def orient(a, b, c):
        return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    def in_triangle(p, a, b, c):
        d1, d2, d3 = orient(a, b, p), orient(b, c, p), orient(c, a, p)
        neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
        pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
        return not (neg and pos)

    def on_segment(p, a, b):
        if orient(a, b, p) != 0.0:
            return False
        return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))

    verts = set()
    pts_t = [tuple(map(float, p)) for p in pts]
    for i, p in enumerate(pts_t):
        others = [q for j, q in enumerate(pts_t) if j != i]
        contained = any(on_segment(p, a, b) for a, b in combinations(others, 2))
        if not contained:
            contained = any(in_triangle(p, a, b, c)
                            for a, b, c in combinations(others, 3))
        if not contained:
            verts.add(p)
    return verts


def pattern_void_oracle(points, spacing, anchor):
    """Flood fill from outside the padded bounding box (4-connectivity);
    a void exists iff some empty cell is unreachable."""
    grid = {tuple(np.rint((p - anchor) / spacing).astype(int)) for p in points}
    xs = [c[0] for c in grid]
    ys = [c[1] for c in grid]
    x0, x1 = min(xs) - 1, max(xs) + 1
    y0, y1 = min(ys) - 1, max(ys) + 1
    seen = set()
    q = deque([(x0, y0)])
    while q:
        c = q.popleft()
        if c in seen or c in grid:
            continue
        if not (x0 <= c[0] <= x1 and y0 <= c[1] <= y1):
            continue
        seen.add(c)
        q.extend([(c[0] + 1, c[1]), (c[0] - 1, c[1]),
                  (c[0], c[1] + 1), (c[0], c[1] - 1)])
    empty = {(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)} - grid
    return bool(empty - seen)


def matching_oracle(pos, pts, tol):
    """Exhaustive permutation search for a robot-goal matching with every
    pair within tolerance."""
    n = len(pos)
    for perm in permutations(range(n)):
        if all(np.hypot(*(pos[i] - pts[perm[i]])) <= tol for i in range(n)):
            return True
    return False


def mean_cov_oracle(pts):
    """Two-pass compensated-summation mean and population covariance."""
    import math
    n = len(pts)
    mx = math.fsum(p[0] for p in pts) / n
    my = math.fsum(p[1] for p in pts) / n
    xx = math.fsum((p[0] - mx) ** 2 for p in pts) / n
    yy = math.fsum((p[1] - my) ** 2 for p in pts) / n
    xy = math.fsum((p[0] - mx) * (p[1] - my) for p in pts) / n
    return (mx, my), (xx, xy, yy)
