"""JIT-compiled inner loops of the contact solver.

Everything here operates on flat float64/int64 arrays so numba can compile
it once and the step loop stays allocation-light.  All math is plain IEEE
double arithmetic with a fixed iteration order, which is what makes
trajectories bit-reproducible.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def disc_disc_contacts(pos, radii):
    """All overlapping disc pairs (i < j). Touching exactly is not a contact.

    Returns (ia, ib, nx, ny, depth, px, py); normals point from i to j.
    """
    n = pos.shape[0]
    cap = 16 * n + 64
    ia = np.empty(cap, np.int64)
    ib = np.empty(cap, np.int64)
    nx = np.empty(cap, np.float64)
    ny = np.empty(cap, np.float64)
    dep = np.empty(cap, np.float64)
    px = np.empty(cap, np.float64)
    py = np.empty(cap, np.float64)
    m = 0
    for i in range(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        ri = radii[i]
        for j in range(i + 1, n):
            dx = pos[j, 0] - xi
            dy = pos[j, 1] - yi
            rs = ri + radii[j]
            d2 = dx * dx + dy * dy
            if d2 < rs * rs and m < cap:
                d = math.sqrt(d2)
                if d > 1e-12:
                    ux = dx / d
                    uy = dy / d
                else:
                    # coincident centers: pick a fixed axis
                    ux = 1.0
                    uy = 0.0
                    d = 0.0
                ia[m] = i
                ib[m] = j
                nx[m] = ux
                ny[m] = uy
                dep[m] = rs - d
                half = ri - 0.5 * (rs - d)
                px[m] = xi + ux * half
                py[m] = yi + uy * half
                m += 1
    return ia[:m].copy(), ib[:m].copy(), nx[:m].copy(), ny[:m].copy(), dep[:m].copy(), px[:m].copy(), py[:m].copy()


@njit(cache=True)
def disc_poly_contacts(pos, radii, poly):
    """Contacts between every disc and one convex ccw polygon.

    Normal points from the disc toward the polygon (continued inward when
    the disc center is inside).  Contact point is on the polygon boundary.
    Returns (idx, nx, ny, depth, px, py) with at most one row per disc.
    """
    n = pos.shape[0]
    k = poly.shape[0]
    idx = np.empty(n, np.int64)
    nx = np.empty(n, np.float64)
    ny = np.empty(n, np.float64)
    dep = np.empty(n, np.float64)
    px = np.empty(n, np.float64)
    py = np.empty(n, np.float64)
    m = 0
    for r in range(n):
        cx = pos[r, 0]
        cy = pos[r, 1]
        rad = radii[r]
        inside = True
        best_d2 = 1e300
        bqx = 0.0
        bqy = 0.0
        # least-deep edge while inside (max signed distance, all <= 0)
        max_sd = -1e300
        mox = 0.0
        moy = 0.0
        for e in range(k):
            ax = poly[e, 0]
            ay = poly[e, 1]
            e1 = e + 1
            if e1 == k:
                e1 = 0
            bx = poly[e1, 0]
            by = poly[e1, 1]
            ex = bx - ax
            ey = by - ay
            el = math.sqrt(ex * ex + ey * ey)
            ox = ey / el
            oy = -ex / el
            sd = (cx - ax) * ox + (cy - ay) * oy
            if sd > 0.0:
                inside = False
            if sd > max_sd:
                max_sd = sd
                mox = ox
                moy = oy
            t = ((cx - ax) * ex + (cy - ay) * ey) / (ex * ex + ey * ey)
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            qx = ax + t * ex
            qy = ay + t * ey
            d2 = (cx - qx) * (cx - qx) + (cy - qy) * (cy - qy)
            if d2 < best_d2:
                best_d2 = d2
                bqx = qx
                bqy = qy
        if inside:
            idx[m] = r
            nx[m] = -mox
            ny[m] = -moy
            dep[m] = rad - max_sd
            px[m] = cx - mox * max_sd
            py[m] = cy - moy * max_sd
            m += 1
        else:
            d = math.sqrt(best_d2)
            if d < rad:
                idx[m] = r
                if d > 1e-12:
                    nx[m] = (bqx - cx) / d
                    ny[m] = (bqy - cy) / d
                else:
                    nx[m] = -mox
                    ny[m] = -moy
                dep[m] = rad - d
                px[m] = bqx
                py[m] = bqy
                m += 1
    return idx[:m].copy(), nx[:m].copy(), ny[:m].copy(), dep[:m].copy(), px[:m].copy(), py[:m].copy()


@njit(cache=True)
def solve_velocity(vel, angvel, inv_m, inv_i, pos, ia, ib, nx, ny, px, py, iterations):
    """Sequential normal impulses, zero restitution, accumulated clamping.

    Mutates vel/angvel in place.  Fixed contact order per iteration keeps
    the result deterministic.
    """
    m = ia.shape[0]
    acc = np.zeros(m, np.float64)
    for _ in range(iterations):
        for c in range(m):
            a = ia[c]
            b = ib[c]
            cnx = nx[c]
            cny = ny[c]
            rax = px[c] - pos[a, 0]
            ray = py[c] - pos[a, 1]
            rbx = px[c] - pos[b, 0]
            rby = py[c] - pos[b, 1]
            ran = rax * cny - ray * cnx
            rbn = rbx * cny - rby * cnx
            kn = inv_m[a] + inv_m[b] + inv_i[a] * ran * ran + inv_i[b] * rbn * rbn
            if kn <= 0.0:
                continue
            rvx = vel[b, 0] - angvel[b] * rby - vel[a, 0] + angvel[a] * ray
            rvy = vel[b, 1] + angvel[b] * rbx - vel[a, 1] - angvel[a] * rax
            vn = rvx * cnx + rvy * cny
            j = -vn / kn
            new_acc = acc[c] + j
            if new_acc < 0.0:
                new_acc = 0.0
            d = new_acc - acc[c]
            acc[c] = new_acc
            vel[a, 0] -= d * cnx * inv_m[a]
            vel[a, 1] -= d * cny * inv_m[a]
            angvel[a] -= d * ran * inv_i[a]
            vel[b, 0] += d * cnx * inv_m[b]
            vel[b, 1] += d * cny * inv_m[b]
            angvel[b] += d * rbn * inv_i[b]


@njit(cache=True)
def solve_position(pos, angle, inv_m, inv_i, ia, ib, nx, ny, px, py, depth,
                   pos0, beta, slop, iterations):
    """Nonlinear Gauss-Seidel positional correction (velocities untouched).

    `depth` and the anchors were measured at body positions `pos0`; the
    current penetration of a contact is tracked through the center
    displacements applied so far.  Rotation of anchors within the pass is a
    second-order effect and ignored.
    """
    m = ia.shape[0]
    for _ in range(iterations):
        for c in range(m):
            a = ia[c]
            b = ib[c]
            cnx = nx[c]
            cny = ny[c]
            sep_gain = ((pos[b, 0] - pos0[b, 0]) - (pos[a, 0] - pos0[a, 0])) * cnx \
                + ((pos[b, 1] - pos0[b, 1]) - (pos[a, 1] - pos0[a, 1])) * cny
            d_now = depth[c] - sep_gain
            if d_now <= slop:
                continue
            rax = px[c] - pos0[a, 0]
            ray = py[c] - pos0[a, 1]
            rbx = px[c] - pos0[b, 0]
            rby = py[c] - pos0[b, 1]
            ran = rax * cny - ray * cnx
            rbn = rbx * cny - rby * cnx
            kn = inv_m[a] + inv_m[b] + inv_i[a] * ran * ran + inv_i[b] * rbn * rbn
            if kn <= 0.0:
                continue
            p = beta * (d_now - slop) / kn
            pos[a, 0] -= p * cnx * inv_m[a]
            pos[a, 1] -= p * cny * inv_m[a]
            angle[a] -= p * ran * inv_i[a]
            pos[b, 0] += p * cnx * inv_m[b]
            pos[b, 1] += p * cny * inv_m[b]
            angle[b] += p * rbn * inv_i[b]
