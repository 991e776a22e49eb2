"""Headless trial runner and batch harness.

One seeded counter-based generator (Philox) drives a trial through three
jumped substreams: lane 0 samples the mode when the config says "random",
lane 1 feeds instantiation jitter, lane 2 is the per-tick stream (noise is
drawn first each tick; a controller that wants randomness draws after).
Identical (config, controller) pairs therefore reproduce trajectories and
records bit for bit, no matter how many trials run in parallel.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .control import (ControlScheme, InputState, InputTracker, control_forces,
                      sample_noise, total_force)
from .errors import ConfigurationError
from .observe import (FullStateObs, HullObs, MeanObs, MeanVarObs,
                      make_observation)
from .physics import polygon_area_centroid, step_world
from .tasks import (GoalSpec, PatternGoal, Phase, RegionGoal, Scenario,
                    TaskKind, TaskMode, TaskState, TaskStatus, evaluate_task,
                    instantiate_task, parse_mode, sample_mode)


def trial_substream(seed: int, lane: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(lane))


@dataclass(frozen=True)
class TrialConfig:
    kind: TaskKind
    mode: TaskMode | str = "random"
    seed: int = 0
    max_steps: int = 18000  # 5 minutes at 60 Hz
    controller_id: str = "none"
    participant_id: str = "headless"

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ConfigurationError("max_steps must be positive")


@dataclass(frozen=True)
class TrialRecord:
    experiment_name: str
    participant_id: str
    duration: float
    num_robots: int
    mode_detail: str
    agent: str
    seed: int
    completed: bool
    steps: int
    scenario_digest: str


@dataclass(frozen=True)
class TaskView:
    """What a policy may see each tick: the trial's observation plus the
    publicly visible scene (workpiece poses, obstacles, goal, clock)."""
    observation: object
    workpiece_poses: tuple[tuple[int, float, float, float], ...]
    obstacles: tuple
    goal: GoalSpec
    kind: TaskKind
    step: int
    dt: float


class Controller:
    """Per-tick policy. `reset` is called at trial start, so an instance
    carries no state across trials; within a trial it must stay
    deterministic (any randomness comes from the rng handed to step)."""

    name = "controller"

    def reset(self) -> None:
        pass

    def step(self, view: TaskView, rng: np.random.Generator) -> InputState:
        raise NotImplementedError


class NoOpController(Controller):
    name = "none"

    def step(self, view, rng):
        return InputState()


def quantize_direction(vx: float, vy: float) -> tuple[int, int]:
    """Sign-quantize a vector to the 8 key directions (22.5-degree bins)."""
    ax, ay = abs(vx), abs(vy)
    if ax < 1e-12 and ay < 1e-12:
        return (0, 0)
    t = math.tan(math.pi / 8.0)
    kx = int(math.copysign(1, vx)) if ax > t * ay else 0
    ky = int(math.copysign(1, vy)) if ay > t * ax else 0
    return (kx, ky)


def observed_center(observation) -> np.ndarray:
    """Swarm center as visible under the trial's feedback level."""
    if isinstance(observation, FullStateObs):
        return observation.positions.mean(axis=0)
    if isinstance(observation, (MeanObs, MeanVarObs)):
        return np.array(observation.point)
    if isinstance(observation, HullObs):
        v = observation.vertices
        if len(v) >= 3:
            _, c = polygon_area_centroid(v)
            return c
        return v.mean(axis=0)
    raise ConfigurationError(f"no center available from {observation!r}")


class PushController(Controller):
    """Two-phase pushing policy for region goals.

    Phase 1 steers the swarm center to a staging point behind the object
    (seen from the goal); once within half the staging distance, phase 2
    drives toward the goal so the swarm pushes the object through.  Phase
    switching is hysteretic and the emitted key direction holds for a
    minimum number of ticks, so the force ramp actually builds up.
    """

    name = "scripted_push"

    DIRECTION_DWELL = 15  # ticks a key direction is held before changing

    def __init__(self, staging_distance: float = 2.4):
        self.staging_distance = staging_distance
        self.reset()

    def reset(self):
        self._pushing = False
        self._committed = (0, 0)
        self._held_for = 10 ** 9

    def staging_point(self, obj: np.ndarray, goal_c: np.ndarray) -> np.ndarray:
        away = obj - goal_c
        norm = float(np.linalg.norm(away))
        if norm < 1e-9:
            return obj.copy()
        return obj + away / norm * self.staging_distance

    def step(self, view, rng):
        if not isinstance(view.goal, RegionGoal):
            raise ConfigurationError("push policy needs a region goal")
        _, goal_c = polygon_area_centroid(view.goal.region)
        _, obj_x, obj_y, _ = view.workpiece_poses[0]
        obj = np.array([obj_x, obj_y])
        staging = self.staging_point(obj, goal_c)
        mean = observed_center(view.observation)
        offset = float(np.linalg.norm(mean - staging))
        d = self.staging_distance
        if self._pushing and offset > 1.2 * d:
            self._pushing = False
        elif not self._pushing and offset < 0.4 * d:
            self._pushing = True
        target = goal_c if self._pushing else staging
        desired = quantize_direction(*(target - mean))
        if desired != self._committed and self._held_for >= self.DIRECTION_DWELL:
            self._committed = desired
            self._held_for = 0
        else:
            self._held_for += 1
        kx, ky = self._committed
        return InputState(np.array([kx, ky], dtype=np.float64))


class PositionController(Controller):
    """Greedy broadcast positioning: chase the worst-matched robot-goal
    pair, leaning on obstacle and wall contacts to break symmetry.  When
    progress stalls it steers perpendicular for a while (deterministic)."""

    name = "scripted_position"

    STALL_WINDOW = 240
    ESCAPE_TICKS = 150

    def reset(self):
        self._best = math.inf
        self._since_improve = 0
        self._escape_left = 0
        self._escape_sign = 1

    def step(self, view, rng):
        if not isinstance(view.goal, PatternGoal):
            raise ConfigurationError("position policy needs a pattern goal")
        if not isinstance(view.observation, FullStateObs):
            raise ConfigurationError("position policy needs full-state feedback")
        pos = view.observation.positions
        pts = view.goal.points
        tol = view.goal.tolerance
        d = np.linalg.norm(pos[:, None, :] - pts[None, :, :], axis=2)
        row, col = linear_sum_assignment(d)
        err_vecs = pts[col] - pos[row]
        errs = d[row, col]
        worst = float(errs.max())
        if worst <= 0.95 * tol:
            return InputState()  # parked; let the dwell counter run out

        mean_err = err_vecs.mean(axis=0)
        spread = float(np.linalg.norm(err_vecs - mean_err, axis=1).max())
        if spread <= 0.9 * tol:
            # the shape already fits: align centroids and stop
            vec = mean_err
        else:
            if worst < self._best - 1e-3:
                self._best = worst
                self._since_improve = 0
            else:
                self._since_improve += 1
            if self._escape_left == 0 and self._since_improve > self.STALL_WINDOW:
                self._escape_left = self.ESCAPE_TICKS
                self._escape_sign = -self._escape_sign
                self._since_improve = 0
            k = int(np.argmax(errs))
            vec = err_vecs[k]
            if self._escape_left > 0:
                self._escape_left -= 1
                vec = np.array([-vec[1], vec[0]]) * self._escape_sign
        kx, ky = quantize_direction(float(vec[0]), float(vec[1]))
        return InputState(np.array([kx, ky], dtype=np.float64))


CONTROLLERS: dict[str, type[Controller]] = {
    NoOpController.name: NoOpController,
    PushController.name: PushController,
    PositionController.name: PositionController,
}


def make_controller(controller_id: str) -> Controller:
    try:
        return CONTROLLERS[controller_id]()
    except KeyError:
        raise ConfigurationError(f"unknown controller {controller_id!r}") from None


def make_view(state: TaskState) -> TaskView:
    obs = make_observation(state.observation, state.world.robot_pos,
                           float(state.world.robot_radius[0]) if state.world.n_robots else 0.0,
                           k=state.ellipse_k)
    poses = tuple((int(state.world.wp_ids[j]), float(state.world.wp_pos[j, 0]),
                   float(state.world.wp_pos[j, 1]), float(state.world.wp_angle[j]))
                  for j in range(state.world.n_workpieces))
    return TaskView(obs, poses, tuple(state.world.obstacles), state.goal,
                    state.kind, state.step, state.world.dt)


def mode_detail_text(state: TaskState, max_steps: int, error: str | None = None) -> str:
    token = state.mode.token()
    parts = [token]
    for extra in (f"scheme={state.scheme.value}", f"obs={state.observation.value}",
                  f"M={state.noise.level}", f"k={state.ellipse_k}",
                  f"max_steps={max_steps}"):
        if not extra.startswith(token.split("=", 1)[0] + "="):
            parts.append(extra)
    if error is not None:
        parts.append(f"error={error}")
    return ";".join(parts)


def resolve_mode(config: TrialConfig, scenario: Scenario | None = None) -> TaskMode:
    if isinstance(config.mode, TaskMode):
        return config.mode
    if config.mode == "random":
        return sample_mode(config.kind, trial_substream(config.seed, 0), scenario)
    return parse_mode(config.kind, config.mode)


def _apply_intent(tracker: InputTracker, intent: InputState) -> None:
    dx, dy = quantize_direction(float(intent.key_direction[0]),
                                float(intent.key_direction[1]))
    want = {k for k, v in (("right", dx > 0), ("left", dx < 0),
                           ("up", dy > 0), ("down", dy < 0)) if v}
    for key in ("left", "right", "up", "down"):
        if key in want:
            tracker.key_down(key)
        else:
            tracker.key_up(key)
    tracker.pointer_move(float(intent.pointer[0]), float(intent.pointer[1]))
    if intent.pointer_engaged:
        tracker.pointer_down()
    else:
        tracker.pointer_up()


def run_trial(config: TrialConfig, controller: Controller | None = None,
              scenario: Scenario | None = None, state_hook=None,
              phase_trace: list | None = None) -> TrialRecord:
    """instantiate -> loop {noise, controller, forces, step, evaluate}.

    Returns a fully populated record; the trajectory and record are a pure
    function of (config, controller, scenario).  A controller exception
    aborts the trial into a completed=false record with the error noted.
    """
    if controller is None:
        controller = make_controller(config.controller_id)
    mode = resolve_mode(config, scenario)
    state = instantiate_task(config.kind, mode, config.seed, scenario)
    if phase_trace is not None:
        phase_trace.append(state.phase)
    tick_rng = trial_substream(config.seed, 2)
    tracker = InputTracker(state.scheme)
    controller.reset()

    n = state.world.n_robots
    dt = state.world.dt
    completed = False
    error = None
    while state.step < config.max_steps:
        state.phase = Phase.SIMULATION
        if phase_trace is not None:
            phase_trace.append(state.phase)
        noise = sample_noise(tick_rng, n, state.noise, state.control_params)
        try:
            intent = controller.step(make_view(state), tick_rng)
        except Exception as exc:  # noqa: BLE001 - captured into the record
            error = f"{type(exc).__name__}: {exc}"
            break
        _apply_intent(tracker, intent)
        input_state = tracker.tick(dt)
        forces = control_forces(state.scheme, input_state,
                                state.world.robot_pos, state.control_params)
        state.world = step_world(state.world, total_force(forces, noise))
        state.step += 1
        state.phase = Phase.EVALUATION
        if phase_trace is not None:
            phase_trace.append(state.phase)
        if state_hook is not None:
            state_hook(state)
        if evaluate_task(state) is TaskStatus.COMPLETE:
            completed = True
            break
    if phase_trace is not None:
        phase_trace.append(state.phase)

    return TrialRecord(
        experiment_name=config.kind.value,
        participant_id=config.participant_id,
        duration=state.step * dt,
        num_robots=n,
        mode_detail=mode_detail_text(state, config.max_steps, error),
        agent=controller.name,
        seed=config.seed,
        completed=completed,
        steps=state.step,
        scenario_digest=state.scenario_digest,
    )


def replay_events(config: TrialConfig, events, scenario: Scenario | None = None,
                  state_hook=None) -> TrialRecord:
    """Drive a trial from tick-aligned input events instead of a policy.

    Each event dict has `tick` (the step index it lands before), `type`
    (key_down/key_up/pointer_move/pointer_down/pointer_up) and its payload.
    The physics pipeline is identical to run_trial's.
    """
    mode = resolve_mode(config, scenario)
    state = instantiate_task(config.kind, mode, config.seed, scenario)
    tick_rng = trial_substream(config.seed, 2)
    tracker = InputTracker(state.scheme)
    queue = sorted(events, key=lambda e: (int(e["tick"]), int(e.get("client_sequence", 0))))
    qi = 0
    n = state.world.n_robots
    dt = state.world.dt
    completed = False
    while state.step < config.max_steps:
        state.phase = Phase.SIMULATION
        noise = sample_noise(tick_rng, n, state.noise, state.control_params)
        while qi < len(queue) and int(queue[qi]["tick"]) <= state.step:
            apply_input_event(tracker, queue[qi])
            qi += 1
        input_state = tracker.tick(dt)
        forces = control_forces(state.scheme, input_state,
                                state.world.robot_pos, state.control_params)
        state.world = step_world(state.world, total_force(forces, noise))
        state.step += 1
        state.phase = Phase.EVALUATION
        if state_hook is not None:
            state_hook(state)
        if evaluate_task(state) is TaskStatus.COMPLETE:
            completed = True
            break
    return TrialRecord(
        experiment_name=config.kind.value,
        participant_id=config.participant_id,
        duration=state.step * dt,
        num_robots=n,
        mode_detail=mode_detail_text(state, config.max_steps),
        agent=config.controller_id,
        seed=config.seed,
        completed=completed,
        steps=state.step,
        scenario_digest=state.scenario_digest,
    )


def apply_input_event(tracker: InputTracker, event: dict) -> None:
    """Route one wire-format input event into the tracker."""
    etype = event["type"]
    if etype == "key_down":
        tracker.key_down(event["key"])
    elif etype == "key_up":
        tracker.key_up(event["key"])
    elif etype == "pointer_move":
        tracker.pointer_move(float(event["x"]), float(event["y"]))
    elif etype == "pointer_down":
        tracker.pointer_down(float(event["x"]), float(event["y"]))
    elif etype == "pointer_up":
        tracker.pointer_up()
    else:
        raise ConfigurationError(f"unknown input event type {etype!r}")


def run_batch(configs, parallelism: int = 1,
              scenario: Scenario | None = None) -> list[TrialRecord]:
    """Run trials concurrently (one world per trial); output order equals
    input order and content is independent of the parallelism level."""
    if parallelism < 1:
        raise ConfigurationError("parallelism must be >= 1")
    configs = list(configs)

    def one(config: TrialConfig) -> TrialRecord:
        try:
            return run_trial(config, make_controller(config.controller_id), scenario)
        except Exception as exc:  # noqa: BLE001 - batch never aborts
            return TrialRecord(config.kind.value, config.participant_id, 0.0, 0,
                               f"error={type(exc).__name__}: {exc}",
                               config.controller_id, config.seed, False, 0, "")

    if parallelism == 1:
        return [one(c) for c in configs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, configs))


def record_group_key(record: TrialRecord, group_key: str):
    if group_key == "mode":
        return record.mode_detail.split(";", 1)[0]
    if not hasattr(record, group_key):
        raise ConfigurationError(f"unknown group key {group_key!r}")
    return getattr(record, group_key)


def aggregate_stats(records, group_key: str = "mode") -> list[dict]:
    """Per-group completion rate and completed-duration quartiles
    (linear interpolation).  Groups with no records are omitted; groups
    with no completions carry a completion_rate of 0 and no quartiles."""
    records = list(records)
    if not records:
        raise ConfigurationError("aggregate_stats needs at least one record")
    groups: dict[object, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(record_group_key(r, group_key), []).append(r)
    rows = []
    for label in sorted(groups, key=lambda v: (str(type(v)), v)):
        rs = groups[label]
        durations = sorted(r.duration for r in rs if r.completed)
        row = {"group": label, "count": len(rs), "completed": len(durations),
               "completion_rate": len(durations) / len(rs)}
        if durations:
            q1, med, q3 = np.percentile(durations, [25, 50, 75])
            row.update(min=durations[0], q1=float(q1), median=float(med),
                       q3=float(q3), max=durations[-1])
        rows.append(row)
    return rows
