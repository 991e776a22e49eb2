"""Deterministic fixed-timestep 2D rigid-body world.

Disc robots are overdamped force-driven particles (no angular state);
convex polygonal workpieces carry full planar rigid-body state; obstacles
and the arena walls are static.  One step is: integrate forces into
velocities, damp, resolve contact impulses, integrate positions, then
apply positional correction so resting penetration stays below the
configured tolerance.

With linear damping b, a constant force F drives an isolated body to the
terminal speed |F| / (mass * b), so commanded forces map to proportional
steady-state velocities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError

WALL_NAMES = ("left", "bottom", "right", "top")

ROBOT = "robot"
WORKPIECE = "workpiece"
OBSTACLE = "obstacle"
WALL = "wall"


def _as_vec2(v, what: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(2)
    if not np.isfinite(a).all():
        raise ConfigurationError(f"{what} must be finite, got {a}")
    return a


def validate_convex_ccw(vertices, what: str = "polygon") -> np.ndarray:
    """Check a vertex list is a strictly convex counter-clockwise cycle."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
        raise ConfigurationError(f"{what} needs at least 3 (x, y) vertices")
    if not np.isfinite(v).all():
        raise ConfigurationError(f"{what} has non-finite vertices")
    n = v.shape[0]
    for i in range(n):
        a = v[i]
        b = v[(i + 1) % n]
        c = v[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross <= 0.0:
            raise ConfigurationError(
                f"{what} must be strictly convex and counter-clockwise "
                f"(bad turn at vertex {(i + 1) % n})")
    return v.copy()


def polygon_area_centroid(vertices: np.ndarray) -> tuple[float, np.ndarray]:
    x = vertices[:, 0]
    y = vertices[:, 1]
    x1 = np.roll(x, -1)
    y1 = np.roll(y, -1)
    cr = x * y1 - x1 * y
    area = 0.5 * float(cr.sum())
    cx = float(((x + x1) * cr).sum()) / (6.0 * area)
    cy = float(((y + y1) * cr).sum()) / (6.0 * area)
    return area, np.array([cx, cy])


def polygon_moment_per_mass(vertices: np.ndarray) -> float:
    """Second moment of area / area, about the origin of the given frame."""
    num = 0.0
    den = 0.0
    n = vertices.shape[0]
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        cr = a[0] * b[1] - b[0] * a[1]
        num += cr * (a @ a + a @ b + b @ b)
        den += cr
    return num / (6.0 * den)


@dataclass
class RobotBody:
    id: int
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    radius: float = 0.15
    mass: float = 1.0


@dataclass
class Workpiece:
    """Convex pushable body. Local vertices are re-centered on the centroid
    at construction so the pose position is the center of mass."""
    id: int
    local_vertices: np.ndarray
    position: np.ndarray
    angle: float = 0.0
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    angular_velocity: float = 0.0
    mass: float = 1.0
    moment: float | None = None


@dataclass
class Obstacle:
    world_vertices: np.ndarray


@dataclass
class Contact:
    kind_a: str
    id_a: int
    kind_b: str
    id_b: int
    normal: np.ndarray  # unit vector from body a toward body b
    depth: float
    point: np.ndarray


def _rot(angle: float) -> np.ndarray:
    c = math.cos(angle)
    s = math.sin(angle)
    return np.array([[c, -s], [s, c]])


class World:
    """Self-contained simulation state. `step_world` returns a new World;
    a World is never shared between threads while being stepped."""

    def __init__(self, arena, robots=(), workpieces=(), obstacles=(),
                 dt: float = 1.0 / 60.0, damping: float = 4.0,
                 workpiece_damping: float | None = None,
                 solver_iterations: int = 8, position_correction: float = 0.2,
                 penetration_tolerance: float = 5e-3,
                 max_robot_speed: float | None = None):
        xmin, ymin, xmax, ymax = (float(v) for v in arena)
        if not (xmax > xmin and ymax > ymin):
            raise ConfigurationError("arena must be a nonempty rectangle")
        if dt <= 0:
            raise ConfigurationError("dt must be positive")
        if not 0.0 < position_correction <= 1.0:
            raise ConfigurationError("position_correction must be in (0, 1]")
        if solver_iterations < 1:
            raise ConfigurationError("solver_iterations must be >= 1")
        self.arena = (xmin, ymin, xmax, ymax)
        self.dt = float(dt)
        self.damping = float(damping)
        self.workpiece_damping = float(workpiece_damping if workpiece_damping is not None else damping)
        self.solver_iterations = int(solver_iterations)
        self.position_correction = float(position_correction)
        self.penetration_tolerance = float(penetration_tolerance)
        self.max_robot_speed = None if max_robot_speed is None else float(max_robot_speed)

        robots = list(robots)
        self.robot_ids = np.array([r.id for r in robots], dtype=np.int64)
        self.robot_pos = np.array([_as_vec2(r.position, "robot position") for r in robots],
                                  dtype=np.float64).reshape(len(robots), 2)
        self.robot_vel = np.array([_as_vec2(r.velocity, "robot velocity") for r in robots],
                                  dtype=np.float64).reshape(len(robots), 2)
        self.robot_radius = np.array([r.radius for r in robots], dtype=np.float64)
        self.robot_mass = np.array([r.mass for r in robots], dtype=np.float64)
        if len(robots) and (self.robot_radius <= 0).any():
            raise ConfigurationError("robot radius must be positive")
        if len(robots) and (self.robot_mass <= 0).any():
            raise ConfigurationError("robot mass must be positive")

        workpieces = list(workpieces)
        self.wp_ids = np.array([w.id for w in workpieces], dtype=np.int64)
        self.wp_local: list[np.ndarray] = []
        for w in workpieces:
            verts = validate_convex_ccw(w.local_vertices, f"workpiece {w.id}")
            _, centroid = polygon_area_centroid(verts)
            self.wp_local.append(verts - centroid)
        self.wp_pos = np.array([_as_vec2(w.position, "workpiece position") for w in workpieces],
                               dtype=np.float64).reshape(len(workpieces), 2)
        self.wp_angle = np.array([float(w.angle) for w in workpieces], dtype=np.float64)
        self.wp_vel = np.array([_as_vec2(w.linear_velocity, "workpiece velocity") for w in workpieces],
                               dtype=np.float64).reshape(len(workpieces), 2)
        self.wp_angvel = np.array([float(w.angular_velocity) for w in workpieces], dtype=np.float64)
        self.wp_mass = np.array([float(w.mass) for w in workpieces], dtype=np.float64)
        moments = []
        for w, local in zip(workpieces, self.wp_local):
            if w.moment is not None:
                moments.append(float(w.moment))
            else:
                moments.append(float(w.mass) * polygon_moment_per_mass(local))
        self.wp_moment = np.array(moments, dtype=np.float64)
        if len(workpieces) and ((self.wp_mass <= 0).any() or (self.wp_moment <= 0).any()):
            raise ConfigurationError("workpiece mass and moment must be positive")

        self.obstacles: list[np.ndarray] = [
            validate_convex_ccw(o.world_vertices, f"obstacle {i}")
            for i, o in enumerate(obstacles)
        ]

    # ---- inspection -------------------------------------------------

    @property
    def n_robots(self) -> int:
        return self.robot_pos.shape[0]

    @property
    def n_workpieces(self) -> int:
        return self.wp_pos.shape[0]

    def robot(self, i: int) -> RobotBody:
        return RobotBody(int(self.robot_ids[i]), self.robot_pos[i].copy(),
                         self.robot_vel[i].copy(), float(self.robot_radius[i]),
                         float(self.robot_mass[i]))

    def workpiece(self, j: int) -> Workpiece:
        return Workpiece(int(self.wp_ids[j]), self.wp_local[j].copy(),
                         self.wp_pos[j].copy(), float(self.wp_angle[j]),
                         self.wp_vel[j].copy(), float(self.wp_angvel[j]),
                         float(self.wp_mass[j]), float(self.wp_moment[j]))

    def workpiece_world_vertices(self, j: int) -> np.ndarray:
        return self.wp_local[j] @ _rot(float(self.wp_angle[j])).T + self.wp_pos[j]

    def copy(self) -> World:
        w = World.__new__(World)
        w.arena = self.arena
        w.dt = self.dt
        w.damping = self.damping
        w.workpiece_damping = self.workpiece_damping
        w.solver_iterations = self.solver_iterations
        w.position_correction = self.position_correction
        w.penetration_tolerance = self.penetration_tolerance
        w.max_robot_speed = self.max_robot_speed
        w.robot_ids = self.robot_ids
        w.robot_pos = self.robot_pos.copy()
        w.robot_vel = self.robot_vel.copy()
        w.robot_radius = self.robot_radius
        w.robot_mass = self.robot_mass
        w.wp_ids = self.wp_ids
        w.wp_local = self.wp_local
        w.wp_pos = self.wp_pos.copy()
        w.wp_angle = self.wp_angle.copy()
        w.wp_vel = self.wp_vel.copy()
        w.wp_angvel = self.wp_angvel.copy()
        w.wp_mass = self.wp_mass
        w.wp_moment = self.wp_moment
        w.obstacles = self.obstacles
        return w

    def state_bytes(self) -> bytes:
        """Canonical byte encoding of the dynamic state (for digests)."""
        parts = [self.robot_pos.tobytes(), self.robot_vel.tobytes(),
                 self.wp_pos.tobytes(), self.wp_angle.tobytes(),
                 self.wp_vel.tobytes(), self.wp_angvel.tobytes()]
        return b"".join(parts)

    def max_penetration(self) -> float:
        contacts = compute_contacts(self)
        return max((c.depth for c in contacts), default=0.0)


# ---- contact generation ---------------------------------------------


def _poly_edge_normals(v: np.ndarray) -> np.ndarray:
    e = np.roll(v, -1, axis=0) - v
    n = np.stack([e[:, 1], -e[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _sat_polygon_manifold(va: np.ndarray, vb: np.ndarray):
    """Separating-axis manifold between two strictly convex ccw polygons.

    Returns (normal a->b, [(point, depth), ...]) or None when separated.
    Contact points lie on the incident polygon's clipped edge; up to two.
    """
    def max_separation(vref, vother):
        normals = _poly_edge_normals(vref)
        best = -np.inf
        best_i = 0
        for i in range(len(vref)):
            s = float(np.min((vother - vref[i]) @ normals[i]))
            if s > best:
                best = s
                best_i = i
        return best, best_i

    sa, ea = max_separation(va, vb)
    if sa > 0.0:
        return None
    sb, eb = max_separation(vb, va)
    if sb > 0.0:
        return None

    # prefer the axis with the smaller penetration (larger separation)
    if sb > sa + 1e-10:
        vref, vinc, edge, flip = vb, va, eb, True
    else:
        vref, vinc, edge, flip = va, vb, ea, False

    ref_normals = _poly_edge_normals(vref)
    rn = ref_normals[edge]
    r1 = vref[edge]
    r2 = vref[(edge + 1) % len(vref)]

    # incident edge: most anti-parallel to the reference normal
    inc_normals = _poly_edge_normals(vinc)
    inc = int(np.argmin(inc_normals @ rn))
    i1 = vinc[inc]
    i2 = vinc[(inc + 1) % len(vinc)]

    # clip incident segment to the reference edge's side planes
    tangent = (r2 - r1) / np.linalg.norm(r2 - r1)

    def clip(p1, p2, t, offset):
        d1 = float(p1 @ t) - offset
        d2 = float(p2 @ t) - offset
        pts = []
        if d1 <= 0.0:
            pts.append(p1)
        if d2 <= 0.0:
            pts.append(p2)
        if d1 * d2 < 0.0:
            pts.append(p1 + (p2 - p1) * (d1 / (d1 - d2)))
        return pts

    pts = clip(i1, i2, -tangent, float(-tangent @ r1))
    if len(pts) < 2:
        pts = pts or [i1]
    else:
        pts = clip(pts[0], pts[1], tangent, float(tangent @ r2)) or pts[:1]

    manifold = []
    for p in pts[:2]:
        sep = float((p - r1) @ rn)
        if sep <= 0.0:
            manifold.append((p, -sep))
    if not manifold:
        return None
    normal = -rn if flip else rn
    return normal, manifold


def _world_polygons(world: World) -> list[tuple[str, int, int, np.ndarray]]:
    """(kind, public id, body-table index, world vertices) per polygon."""
    out = []
    n = world.n_robots
    for j in range(world.n_workpieces):
        out.append((WORKPIECE, int(world.wp_ids[j]), n + j,
                    world.workpiece_world_vertices(j)))
    static_idx = n + world.n_workpieces
    for k, verts in enumerate(world.obstacles):
        out.append((OBSTACLE, k, static_idx, verts))
    return out


def _gather_contacts(world: World, include_walls: bool, want_meta: bool):
    """Contact arrays for the solver, in a fixed deterministic order."""
    n = world.n_robots
    static_idx = n + world.n_workpieces
    polys = _world_polygons(world)

    ia_l, ib_l, nx_l, ny_l, d_l, px_l, py_l = [], [], [], [], [], [], []
    meta: list[tuple[str, int, str, int]] = []

    def emit(a, b, nx, ny, depth, px, py, tag):
        ia_l.append(a)
        ib_l.append(b)
        nx_l.append(nx)
        ny_l.append(ny)
        d_l.append(depth)
        px_l.append(px)
        py_l.append(py)
        if want_meta:
            meta.append(tag)

    # 1. disc-disc
    if n:
        dia, dib, dnx, dny, dd, dpx, dpy = _kernels.disc_disc_contacts(
            world.robot_pos, world.robot_radius)
        for c in range(dia.shape[0]):
            i, j = int(dia[c]), int(dib[c])
            emit(i, j, float(dnx[c]), float(dny[c]), float(dd[c]),
                 float(dpx[c]), float(dpy[c]),
                 (ROBOT, int(world.robot_ids[i]), ROBOT, int(world.robot_ids[j])))

    # 2. disc-polygon (workpieces first, then obstacles)
    if n:
        for kind, pub_id, body_idx, verts in polys:
            idx, pnx, pny, pd, ppx, ppy = _kernels.disc_poly_contacts(
                world.robot_pos, world.robot_radius, verts)
            for c in range(idx.shape[0]):
                i = int(idx[c])
                emit(i, body_idx, float(pnx[c]), float(pny[c]), float(pd[c]),
                     float(ppx[c]), float(ppy[c]),
                     (ROBOT, int(world.robot_ids[i]), kind, pub_id))

    # 3. polygon-polygon (workpiece pairs, then workpiece-obstacle)
    wp_polys = [p for p in polys if p[0] == WORKPIECE]
    ob_polys = [p for p in polys if p[0] == OBSTACLE]
    pairs = [(a, b) for qi, a in enumerate(wp_polys) for b in wp_polys[qi + 1:]]
    pairs += [(a, b) for a in wp_polys for b in ob_polys]
    for (ka, ida, bidx_a, va), (kb, idb, bidx_b, vb) in pairs:
        # cheap AABB reject
        if (va[:, 0].min() > vb[:, 0].max() or vb[:, 0].min() > va[:, 0].max()
                or va[:, 1].min() > vb[:, 1].max() or vb[:, 1].min() > va[:, 1].max()):
            continue
        res = _sat_polygon_manifold(va, vb)
        if res is None:
            continue
        normal, points = res
        for p, depth in points:
            emit(bidx_a, bidx_b, float(normal[0]), float(normal[1]),
                 float(depth), float(p[0]), float(p[1]), (ka, ida, kb, idb))

    # 4. arena walls (normal points from the body outward, toward the wall)
    if include_walls:
        xmin, ymin, xmax, ymax = world.arena
        wall_defs = (((-1.0, 0.0), xmin, 0), ((0.0, -1.0), ymin, 1),
                     ((1.0, 0.0), xmax, 2), ((0.0, 1.0), ymax, 3))
        for i in range(n):
            x, y = world.robot_pos[i]
            r = world.robot_radius[i]
            for (wnx, wny), bound, wall_id in wall_defs:
                support = x * wnx + y * wny + r
                lim = bound * wnx + bound * wny  # one term is zero
                depth = support - lim
                if depth > 0.0:
                    emit(i, static_idx, wnx, wny, float(depth),
                         float(x + wnx * r) if wnx else float(x),
                         float(y + wny * r) if wny else float(y),
                         (ROBOT, int(world.robot_ids[i]), WALL, wall_id))
        for kind, pub_id, body_idx, verts in wp_polys:
            for (wnx, wny), bound, wall_id in wall_defs:
                proj = verts[:, 0] * wnx + verts[:, 1] * wny
                lim = bound * wnx + bound * wny
                over = proj - lim
                deep = np.nonzero(over > 0.0)[0]
                order = deep[np.argsort(-over[deep], kind="stable")][:2]
                for vi in order:
                    emit(body_idx, static_idx, wnx, wny, float(over[vi]),
                         float(verts[vi, 0]), float(verts[vi, 1]),
                         (kind, pub_id, WALL, wall_id))

    arrays = (np.array(ia_l, dtype=np.int64), np.array(ib_l, dtype=np.int64),
              np.array(nx_l), np.array(ny_l), np.array(d_l),
              np.array(px_l), np.array(py_l))
    return (arrays, meta) if want_meta else arrays


def compute_contacts(world: World) -> list[Contact]:
    """Every overlapping pair (disc-disc, disc-polygon, polygon-polygon,
    body-wall).  A polygon pair may contribute two entries (two manifold
    points).  Normals point from the first body to the second."""
    (ia, ib, nx, ny, d, px, py), meta = _gather_contacts(
        world, include_walls=True, want_meta=True)
    out = []
    for c in range(ia.shape[0]):
        ka, aid, kb, bid = meta[c]
        out.append(Contact(ka, aid, kb, bid,
                           np.array([nx[c], ny[c]]), float(d[c]),
                           np.array([px[c], py[c]])))
    return out


# ---- stepping --------------------------------------------------------


def _body_table(world: World):
    n = world.n_robots
    m = world.n_workpieces
    size = n + m + 1  # final row: shared static body (obstacles, walls)
    pos = np.zeros((size, 2))
    angle = np.zeros(size)
    vel = np.zeros((size, 2))
    angvel = np.zeros(size)
    inv_m = np.zeros(size)
    inv_i = np.zeros(size)
    pos[:n] = world.robot_pos
    vel[:n] = world.robot_vel
    inv_m[:n] = 1.0 / world.robot_mass
    # robots have no rotational state: inverse inertia stays zero
    pos[n:n + m] = world.wp_pos
    angle[n:n + m] = world.wp_angle
    vel[n:n + m] = world.wp_vel
    angvel[n:n + m] = world.wp_angvel
    if m:
        inv_m[n:n + m] = 1.0 / world.wp_mass
        inv_i[n:n + m] = 1.0 / world.wp_moment
    return pos, angle, vel, angvel, inv_m, inv_i


def _clamp_to_arena(world: World) -> None:
    xmin, ymin, xmax, ymax = world.arena
    if world.n_robots:
        r = world.robot_radius
        np.clip(world.robot_pos[:, 0], xmin + r, xmax - r, out=world.robot_pos[:, 0])
        np.clip(world.robot_pos[:, 1], ymin + r, ymax - r, out=world.robot_pos[:, 1])
    for j in range(world.n_workpieces):
        verts = world.workpiece_world_vertices(j)
        shift_x = max(0.0, xmin - verts[:, 0].min()) - max(0.0, verts[:, 0].max() - xmax)
        shift_y = max(0.0, ymin - verts[:, 1].min()) - max(0.0, verts[:, 1].max() - ymax)
        if shift_x or shift_y:
            world.wp_pos[j, 0] += shift_x
            world.wp_pos[j, 1] += shift_y


def step_world(world: World, robot_forces, workpiece_forces=None) -> World:
    """Advance one fixed timestep; returns a new World.

    Bit-reproducible: identical inputs produce identical outputs.
    """
    n = world.n_robots
    m = world.n_workpieces
    if robot_forces is None:
        rf = np.zeros((n, 2))
    else:
        rf = np.asarray(robot_forces, dtype=np.float64).reshape(-1, 2)
    if rf.shape[0] != n:
        raise ConfigurationError(f"expected {n} robot forces, got {rf.shape[0]}")
    if workpiece_forces is None:
        wf = np.zeros((m, 2))
    else:
        wf = np.asarray(workpiece_forces, dtype=np.float64).reshape(-1, 2)
    if wf.shape[0] != m:
        raise ConfigurationError(f"expected {m} workpiece forces, got {wf.shape[0]}")
    if (n and not np.isfinite(rf).all()) or (m and not np.isfinite(wf).all()):
        raise ConfigurationError("forces must be finite")

    w = world.copy()
    dt = w.dt

    # velocity integration + linear damping (same law for angular)
    if n:
        w.robot_vel += rf * (dt / w.robot_mass)[:, None]
        w.robot_vel *= 1.0 / (1.0 + w.damping * dt)
        if w.max_robot_speed is not None:
            speed = np.sqrt((w.robot_vel ** 2).sum(axis=1))
            over = speed > w.max_robot_speed
            if over.any():
                w.robot_vel[over] *= (w.max_robot_speed / speed[over])[:, None]
    if m:
        w.wp_vel += wf * (dt / w.wp_mass)[:, None]
        damp = 1.0 / (1.0 + w.workpiece_damping * dt)
        w.wp_vel *= damp
        w.wp_angvel *= damp

    pos, angle, vel, angvel, inv_m, inv_i = _body_table(w)

    # impulse pass over contacts at pre-move positions
    ia, ib, nx, ny, dep, px, py = _gather_contacts(w, include_walls=True, want_meta=False)
    if ia.shape[0]:
        _kernels.solve_velocity(vel, angvel, inv_m, inv_i, pos,
                                ia, ib, nx, ny, px, py, w.solver_iterations)
    w.robot_vel = vel[:n].copy()
    w.wp_vel = vel[n:n + m].copy()
    w.wp_angvel = angvel[n:n + m].copy()

    # position integration
    w.robot_pos += w.robot_vel * dt
    w.wp_pos += w.wp_vel * dt
    w.wp_angle += w.wp_angvel * dt

    # positional correction on post-move overlaps (walls handled by clamp)
    ia, ib, nx, ny, dep, px, py = _gather_contacts(w, include_walls=False, want_meta=False)
    if ia.shape[0]:
        pos, angle, _, _, inv_m, inv_i = _body_table(w)
        pos0 = pos.copy()
        _kernels.solve_position(pos, angle, inv_m, inv_i, ia, ib, nx, ny, px, py,
                                dep, pos0, w.position_correction,
                                0.5 * w.penetration_tolerance, w.solver_iterations)
        w.robot_pos = pos[:n].copy()
        w.wp_pos = pos[n:n + m].copy()
        w.wp_angle = angle[n:n + m].copy()

    _clamp_to_arena(w)
    return w
