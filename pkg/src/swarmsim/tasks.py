"""The five experiments as data-driven scenarios.

Geometry lives in one checksummed YAML document (scenarios.yaml); tasks
instantiate worlds from it, sample a mode per trial, and evaluate goal
predicates through the instantiation / simulation / evaluation /
submission lifecycle.  A goal must hold for `dwell_steps` consecutive
evaluations before a trial counts as complete.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .control import ControlParams, ControlScheme, NoiseConfig
from .errors import ConfigurationError
from .observe import ObservationMode
from .physics import Obstacle, RobotBody, Workpiece, World, validate_convex_ccw

try:
    import yaml
except ImportError as exc:  # pragma: no cover
    raise ImportError("pyyaml is required to read the scenario document") from exc


class TaskKind(Enum):
    VARY_NUMBER = "vary_number"
    VARY_CONTROL = "vary_control"
    VARY_VISUALIZATION = "vary_visualization"
    VARY_NOISE = "vary_noise"
    POSITION_CONTROL = "position_control"


class Phase(Enum):
    INSTANTIATION = "instantiation"
    SIMULATION = "simulation"
    EVALUATION = "evaluation"
    SUBMISSION = "submission"


class TaskStatus(Enum):
    RUNNING = "running"
    COMPLETE = "complete"


@dataclass(frozen=True)
class TaskMode:
    """Sampled per-trial parameter: robot count, control scheme,
    observation mode, or noise level, depending on the task kind."""
    kind: TaskKind
    value: object

    def token(self) -> str:
        if self.kind in (TaskKind.VARY_NUMBER, TaskKind.POSITION_CONTROL):
            return f"n={self.value}"
        if self.kind is TaskKind.VARY_CONTROL:
            return f"scheme={self.value.value}"
        if self.kind is TaskKind.VARY_VISUALIZATION:
            return f"obs={self.value.value}"
        return f"M={self.value}"


def parse_mode(kind: TaskKind, token: str) -> TaskMode:
    """Inverse of TaskMode.token (used by the CLI and the wire protocol)."""
    try:
        key, raw = token.split("=", 1)
    except ValueError:
        raise ConfigurationError(f"bad mode token {token!r}") from None
    if key == "n" and kind in (TaskKind.VARY_NUMBER, TaskKind.POSITION_CONTROL):
        return TaskMode(kind, int(raw))
    if key == "scheme" and kind is TaskKind.VARY_CONTROL:
        return TaskMode(kind, ControlScheme(raw))
    if key == "obs" and kind is TaskKind.VARY_VISUALIZATION:
        return TaskMode(kind, ObservationMode(raw))
    if key == "M" and kind is TaskKind.VARY_NOISE:
        return TaskMode(kind, float(raw))
    raise ConfigurationError(f"mode token {token!r} does not fit task {kind.value}")


@dataclass(frozen=True)
class RegionGoal:
    region: np.ndarray            # convex ccw polygon
    workpiece_ids: tuple[int, ...]
    dwell_steps: int


@dataclass(frozen=True)
class PyramidGoal:
    targets: tuple[tuple[float, float, float], ...]  # (x, y, angle)
    position_tolerance: float
    angle_tolerance: float        # radians, modulo the square symmetry
    dwell_steps: int


@dataclass(frozen=True)
class PatternGoal:
    points: np.ndarray
    tolerance: float
    dwell_steps: int


GoalSpec = RegionGoal | PyramidGoal | PatternGoal


@dataclass
class TaskState:
    kind: TaskKind
    mode: TaskMode
    world: World
    goal: GoalSpec
    phase: Phase = Phase.INSTANTIATION
    step: int = 0
    satisfied_streak: int = 0
    scheme: ControlScheme = ControlScheme.GLOBAL_FORCE
    observation: ObservationMode = ObservationMode.FULL_STATE
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    control_params: ControlParams = field(default_factory=lambda: ControlParams(10.0))
    ellipse_k: float = 2.0
    scenario_digest: str = ""


# ---- scenario document ------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    data: dict
    digest: str
    raw: bytes


_DEFAULT_SCENARIO: Scenario | None = None


def load_scenario(path: str | Path | None = None) -> Scenario:
    """Load the geometry document; the digest covers the exact bytes."""
    global _DEFAULT_SCENARIO
    if path is None and _DEFAULT_SCENARIO is not None:
        return _DEFAULT_SCENARIO
    if path is None:
        raw = resources.files(__package__).joinpath("scenarios.yaml").read_bytes()
    else:
        raw = Path(path).read_bytes()
    scenario = Scenario(yaml.safe_load(raw), hashlib.sha256(raw).hexdigest(), raw)
    if path is None:
        _DEFAULT_SCENARIO = scenario
    return scenario


def mode_options(kind: TaskKind, scenario: Scenario | None = None) -> list:
    sc = (scenario or load_scenario()).data
    if kind is TaskKind.VARY_NUMBER:
        return list(sc["tasks"]["vary_number"]["counts"])
    if kind is TaskKind.VARY_CONTROL:
        return [ControlScheme.GLOBAL_FORCE, ControlScheme.ATTRACTIVE_POINT,
                ControlScheme.REPULSIVE_POINT]
    if kind is TaskKind.VARY_VISUALIZATION:
        return [ObservationMode.FULL_STATE, ObservationMode.CONVEX_HULL,
                ObservationMode.MEAN, ObservationMode.MEAN_VARIANCE]
    if kind is TaskKind.VARY_NOISE:
        return [float(v) for v in sc["tasks"]["vary_noise"]["levels"]]
    if kind is TaskKind.POSITION_CONTROL:
        return list(sc["tasks"]["position_control"]["counts"])
    raise ConfigurationError(f"unknown task kind {kind}")


def sample_mode(kind: TaskKind, rng: np.random.Generator,
                scenario: Scenario | None = None) -> TaskMode:
    """Uniform draw from the kind's mode set."""
    options = mode_options(kind, scenario)
    return TaskMode(kind, options[int(rng.integers(0, len(options)))])


# ---- world construction ----------------------------------------------


def hex_packed_positions(pocket, n: int, radius: float, pitch: float,
                         jitter: float, rng: np.random.Generator) -> np.ndarray:
    """Deterministic hex-grid placement inside a rectangular pocket,
    row-major from the bottom, plus a small per-seed jitter."""
    x0, y0, x1, y1 = (float(v) for v in pocket)
    margin = radius + jitter + 0.01
    row_h = pitch * math.sqrt(3.0) / 2.0
    pts = []
    row = 0
    y = y0 + margin
    while len(pts) < n and y <= y1 - margin:
        x = x0 + margin + (pitch / 2.0 if row % 2 else 0.0)
        placed = 0
        while len(pts) < n and x <= x1 - margin:
            pts.append((x, y))
            placed += 1
            x += pitch
        if placed == 0 and x0 + margin <= x1 - margin:
            # pocket too narrow for the odd-row offset: stack a column
            pts.append((x0 + margin, y))
        row += 1
        y = y0 + margin + row * row_h
    if len(pts) < n:
        raise ConfigurationError(
            f"start pocket {pocket} cannot hold {n} robots at pitch {pitch}")
    out = np.array(pts)
    if jitter > 0:
        out = out + rng.uniform(-jitter, jitter, (n, 2))
    return out


def regular_polygon(sides: int, radius: float) -> np.ndarray:
    th = 2.0 * math.pi * np.arange(sides) / sides
    return np.stack([radius * np.cos(th), radius * np.sin(th)], axis=1)


def _square_verts(side: float) -> np.ndarray:
    h = side / 2.0
    return np.array([[-h, -h], [h, -h], [h, h], [-h, h]])


def goal_pattern(n: int, scenario: Scenario | None = None) -> np.ndarray:
    """First n points of the fixed 10-point block-letter layout."""
    sc = (scenario or load_scenario()).data["tasks"]["position_control"]
    if not 1 <= n <= len(sc["pattern_points"]):
        raise ConfigurationError(f"goal pattern supports 1..10 robots, got {n}")
    anchor = np.array(sc["pattern_anchor"], dtype=np.float64)
    spacing = float(sc["pattern_spacing"])
    grid = np.array(sc["pattern_points"][:n], dtype=np.float64)
    return anchor + grid * spacing


def _make_robots(positions: np.ndarray, radius: float, mass: float) -> list[RobotBody]:
    return [RobotBody(i, positions[i].copy(), np.zeros(2), radius, mass)
            for i in range(positions.shape[0])]


def instantiate_task(kind: TaskKind, mode: TaskMode, seed: int,
                     scenario: Scenario | None = None) -> TaskState:
    """Build the world, goal, and control configuration for one trial.

    Pure in (kind, mode, seed, scenario): the placement jitter comes from a
    dedicated substream of the trial seed (Philox, jump 1).
    """
    scenario = scenario or load_scenario()
    sc = scenario.data
    if mode.kind is not kind:
        raise ConfigurationError(f"mode {mode} does not belong to task {kind.value}")
    if mode.value not in mode_options(kind, scenario):
        raise ConfigurationError(f"mode value {mode.value!r} not in the {kind.value} grid")
    rng = np.random.Generator(np.random.Philox(key=seed).jumped(1))

    phys = sc["physics"]
    robot = sc["robot"]
    ctl = sc["control"]
    dwell = int(sc["dwell_steps"])
    arena = tuple(sc["arena"])
    radius = float(robot["radius"])
    rmass = float(robot["mass"])
    pitch = float(robot["pack_pitch"])
    jitter = float(robot["start_jitter"])
    world_kw = dict(dt=float(phys["dt"]), damping=float(phys["damping"]),
                    solver_iterations=int(phys["solver_iterations"]),
                    position_correction=float(phys["position_correction"]),
                    penetration_tolerance=float(phys["penetration_tolerance"]))

    params = ControlParams(float(ctl["u_max"]), float(ctl["ramp_time"]),
                           float(ctl["attract_epsilon"]))
    scheme = ControlScheme.GLOBAL_FORCE
    observation = ObservationMode.FULL_STATE
    noise = NoiseConfig(0.0)

    def hexagon_wp(cfg) -> Workpiece:
        return Workpiece(0, regular_polygon(6, float(cfg["radius"])),
                         np.array(cfg["center"], dtype=np.float64),
                         mass=float(cfg["mass"]))

    if kind is TaskKind.VARY_NUMBER:
        t = sc["tasks"]["vary_number"]
        n = int(mode.value)
        # constant swarm authority: n * u_max fixed, speed cap fixed
        params = ControlParams(float(t["total_force"]) / n,
                               float(ctl["ramp_time"]), float(ctl["attract_epsilon"]))
        world_kw["max_robot_speed"] = float(robot["max_speed"])
        pos = hex_packed_positions(t["start_pocket"], n, radius, pitch, jitter, rng)
        world = World(arena, _make_robots(pos, radius, rmass),
                      [hexagon_wp(t["hexagon"])],
                      [Obstacle(np.array(v, dtype=np.float64)) for v in t["maze"]],
                      **world_kw)
        goal = RegionGoal(validate_convex_ccw(t["goal_region"], "goal region"),
                          (0,), dwell)

    elif kind is TaskKind.VARY_CONTROL:
        t = sc["tasks"]["vary_control"]
        scheme = mode.value
        n = int(t["robots"])
        side = float(t["block"]["side"])
        pos = hex_packed_positions(t["start_pocket"], n, radius, pitch, jitter, rng)
        blocks = [Workpiece(i, _square_verts(side),
                            np.array(c, dtype=np.float64),
                            mass=float(t["block"]["mass"]))
                  for i, c in enumerate(t["block_centers"])]
        world = World(arena, _make_robots(pos, radius, rmass), blocks, [], **world_kw)
        goal = PyramidGoal(tuple((float(x), float(y), math.radians(float(a)))
                                 for x, y, a in t["pyramid_targets"]),
                           float(t["position_tolerance"]),
                           math.radians(float(t["angle_tolerance_deg"])), dwell)

    elif kind in (TaskKind.VARY_VISUALIZATION, TaskKind.VARY_NOISE):
        t = sc["tasks"]["vary_visualization"]
        if kind is TaskKind.VARY_VISUALIZATION:
            observation = mode.value
        else:
            noise = NoiseConfig(float(mode.value))
        n = int(t["robots"])
        pos = hex_packed_positions(t["start_pocket"], n, radius, pitch, jitter, rng)
        world = World(arena, _make_robots(pos, radius, rmass),
                      [hexagon_wp(t["hexagon"])],
                      [Obstacle(np.array(t["obstacle"], dtype=np.float64))],
                      **world_kw)
        goal = RegionGoal(validate_convex_ccw(t["goal_region"], "goal region"),
                          (0,), dwell)

    elif kind is TaskKind.POSITION_CONTROL:
        t = sc["tasks"]["position_control"]
        n = int(mode.value)
        pos = hex_packed_positions(t["start_pocket"], n, radius, pitch, jitter, rng)
        half = float(t["obstacle_side"]) / 2.0
        cx, cy = (float(v) for v in t["obstacle_center"])
        obstacle = Obstacle(np.array([[cx - half, cy - half], [cx + half, cy - half],
                                      [cx + half, cy + half], [cx - half, cy + half]]))
        world = World(arena, _make_robots(pos, radius, rmass), [], [obstacle], **world_kw)
        goal = PatternGoal(goal_pattern(n, scenario), float(t["pattern_tolerance"]), dwell)

    else:
        raise ConfigurationError(f"unknown task kind {kind}")

    return TaskState(kind=kind, mode=mode, world=world, goal=goal,
                     scheme=scheme, observation=observation, noise=noise,
                     control_params=params,
                     ellipse_k=float(sc["observation"]["ellipse_k"]),
                     scenario_digest=scenario.digest)


# ---- goal predicates & lifecycle ---------------------------------------


def point_in_convex(region: np.ndarray, p, tol: float = 1e-12) -> bool:
    n = region.shape[0]
    for i in range(n):
        a = region[i]
        b = region[(i + 1) % n]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -tol:
            return False
    return True


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _square_angle_error(angle: float, target: float) -> float:
    """Smallest rotation to a square-symmetric target (modulo pi/2)."""
    d = _wrap_angle(angle - target) % (math.pi / 2.0)
    return min(d, math.pi / 2.0 - d)


def goal_satisfied(state: TaskState) -> bool:
    """Instantaneous goal predicate (before the dwell requirement)."""
    goal = state.goal
    world = state.world
    if isinstance(goal, RegionGoal):
        for wid in goal.workpiece_ids:
            j = int(np.nonzero(world.wp_ids == wid)[0][0])
            verts = world.workpiece_world_vertices(j)
            if not all(point_in_convex(goal.region, v) for v in verts):
                return False
        return True
    if isinstance(goal, PyramidGoal):
        m = len(goal.targets)
        ok = np.zeros((m, m), dtype=bool)
        for j in range(world.n_workpieces):
            for k, (tx, ty, ta) in enumerate(goal.targets):
                dp = math.hypot(world.wp_pos[j, 0] - tx, world.wp_pos[j, 1] - ty)
                da = _square_angle_error(float(world.wp_angle[j]), ta)
                ok[j, k] = dp <= goal.position_tolerance and da <= goal.angle_tolerance
        row, col = linear_sum_assignment((~ok).astype(float))  # minimize mismatches
        return bool(ok[row, col].all())
    if isinstance(goal, PatternGoal):
        pts = goal.points
        pos = world.robot_pos
        if pos.shape[0] != pts.shape[0]:
            raise ConfigurationError("pattern goal needs one goal point per robot")
        d = np.linalg.norm(pos[:, None, :] - pts[None, :, :], axis=2)
        feasible = d <= goal.tolerance
        row, col = linear_sum_assignment((~feasible).astype(float))
        return bool(feasible[row, col].all())
    raise ConfigurationError(f"unknown goal {goal!r}")


def evaluate_task(state: TaskState) -> TaskStatus:
    """Apply the completion criteria; requires phase == EVALUATION.

    Updates the dwell streak and moves the phase back to SIMULATION
    (running) or on to SUBMISSION (complete).
    """
    if state.phase is not Phase.EVALUATION:
        raise ConfigurationError("evaluate_task requires the evaluation phase")
    if goal_satisfied(state):
        state.satisfied_streak += 1
    else:
        state.satisfied_streak = 0
    if state.satisfied_streak >= state.goal.dwell_steps:
        state.phase = Phase.SUBMISSION
        return TaskStatus.COMPLETE
    state.phase = Phase.SIMULATION
    return TaskStatus.RUNNING
