"""Trial runner, scripted controllers, batch, and aggregation tests."""
import re

import numpy as np
import pytest

from swarmsim import ConfigurationError
from swarmsim.control import InputState
from swarmsim.harness import (Controller, NoOpController, PositionController,
                              PushController, TaskView, TrialConfig,
                              TrialRecord, aggregate_stats, make_controller,
                              observed_center, quantize_direction, replay_events,
                              run_batch, run_trial)
from swarmsim.observe import (FullStateObs, HullObs, MeanObs, ObservationMode,
                              make_observation)
from swarmsim.tasks import (PatternGoal, RegionGoal, TaskKind, TaskMode,
                            goal_pattern)

VIS_FULL = TaskMode(TaskKind.VARY_VISUALIZATION, ObservationMode.FULL_STATE)


def vis_config(**kw):
    defaults = dict(kind=TaskKind.VARY_VISUALIZATION, mode=VIS_FULL, seed=0,
                    max_steps=120, controller_id="none")
    defaults.update(kw)
    return TrialConfig(**defaults)


def test_noop_trial_times_out():
    rec = run_trial(vis_config(max_steps=50))
    assert rec.completed is False
    assert rec.steps == 50
    assert rec.duration == pytest.approx(50 / 60.0)
    assert rec.num_robots == 100
    assert rec.experiment_name == "vary_visualization"
    assert rec.agent == "none"


def test_identical_runs_identical_records():
    digests = []

    def run():
        import hashlib
        h = hashlib.sha256()
        rec = run_trial(vis_config(max_steps=200, controller_id="scripted_push"),
                        state_hook=lambda s: h.update(s.world.state_bytes()))
        digests.append(h.hexdigest())
        return rec

    r1, r2 = run(), run()
    assert r1 == r2
    assert digests[0] == digests[1]


def test_lifecycle_phase_pattern():
    trace = []
    run_trial(vis_config(max_steps=25), phase_trace=trace)
    text = "".join(p.value[0].upper() for p in trace)  # I, S, E, ... pattern
    assert re.fullmatch(r"I(SE)+(S|E)?[ISE]*", text[:len(text)])
    assert text.startswith("ISE")
    assert "EE" not in text and "II" not in text.lstrip("I")


def test_controller_exception_recorded():
    class Boom(Controller):
        name = "boom"

        def step(self, view, rng):
            if view.step >= 10:
                raise RuntimeError("controller exploded")
            return InputState()

    rec = run_trial(vis_config(max_steps=100), controller=Boom())
    assert rec.completed is False
    assert rec.steps == 10
    assert "error=RuntimeError: controller exploded" in rec.mode_detail


def test_mode_detail_contents():
    rec = run_trial(vis_config(max_steps=5))
    assert rec.mode_detail.startswith("obs=full_state")
    assert "M=0.0" in rec.mode_detail
    assert "k=2.0" in rec.mode_detail
    assert "max_steps=5" in rec.mode_detail
    assert "scheme=global" in rec.mode_detail


def test_quantize_direction_sectors():
    assert quantize_direction(1.0, 0.0) == (1, 0)
    assert quantize_direction(-3.0, 0.1) == (-1, 0)
    assert quantize_direction(1.0, 1.0) == (1, 1)
    assert quantize_direction(0.0, 0.0) == (0, 0)
    assert quantize_direction(0.1, 2.0) == (0, 1)


def push_view(obj_xy, goal_center, mean_xy):
    region = np.array(goal_center) + np.array(
        [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    obs = MeanObs((float(mean_xy[0]), float(mean_xy[1])))
    return TaskView(obs, ((0, float(obj_xy[0]), float(obj_xy[1]), 0.0),), (),
                    RegionGoal(region, (0,), 30), TaskKind.VARY_VISUALIZATION,
                    0, 1 / 60.0)


def test_push_controller_staging_geometry():
    # staging-point oracle: p = obj + d * unit(obj - goal)
    ctl = PushController(staging_distance=2.4)
    ctl.reset()
    # swarm far left of the staging point: phase 1 steers east toward p
    view = push_view((5.0, 5.0), (10.0, 5.0), (0.0, 5.0))
    st = ctl.step(view, None)
    assert tuple(st.key_direction) == (1.0, 0.0)
    # swarm below the staging axis: move up-left toward p = (2.6, 5)
    ctl.reset()
    st = ctl.step(push_view((5.0, 5.0), (10.0, 5.0), (5.0, 1.0)), None)
    assert tuple(st.key_direction) == (-1.0, 1.0)
    # swarm at the staging point: phase 2 pushes toward the goal
    ctl.reset()
    st = ctl.step(push_view((5.0, 5.0), (10.0, 5.0), (2.6, 5.0)), None)
    assert tuple(st.key_direction) == (1.0, 0.0)


def test_observed_center_variants():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
    full = make_observation(ObservationMode.FULL_STATE, pts, 0.15)
    hull = make_observation(ObservationMode.CONVEX_HULL, pts, 0.15)
    mean = make_observation(ObservationMode.MEAN, pts, 0.15)
    for obs in (full, hull, mean):
        assert np.allclose(observed_center(obs), [1.0, 1.0])


def test_position_controller_fixed_points():
    ctl = PositionController()
    ctl.reset()
    pts = goal_pattern(3)
    view = TaskView(FullStateObs(pts.copy(), 0.15), (), (),
                    PatternGoal(pts, 0.3, 30), TaskKind.POSITION_CONTROL, 0, 1 / 60.0)
    st = ctl.step(view, None)
    assert tuple(st.key_direction) == (0.0, 0.0)  # already on the goals
    # single robot far west of its goal: head straight toward it
    ctl.reset()
    one = TaskView(FullStateObs(pts[:1] - np.array([5.0, 0.0]), 0.15), (), (),
                   PatternGoal(pts[:1], 0.3, 30), TaskKind.POSITION_CONTROL, 0, 1 / 60.0)
    st = ctl.step(one, None)
    assert tuple(st.key_direction) == (1.0, 0.0)


def test_scripted_push_completes_course():
    rec = run_trial(vis_config(max_steps=4000, controller_id="scripted_push"))
    assert rec.completed
    assert rec.duration == pytest.approx(rec.steps / 60.0)


def test_scripted_position_completes_small_n():
    cfg = TrialConfig(TaskKind.POSITION_CONTROL,
                      TaskMode(TaskKind.POSITION_CONTROL, 3), seed=5,
                      max_steps=6000, controller_id="scripted_position")
    rec = run_trial(cfg)
    assert rec.completed


def test_identical_inputs_solve_n1_and_n2():
    """Design-flaw regression: the input stream that solves one robot also
    solves two robots whose start offset mirrors the goal offset."""
    from swarmsim.control import ControlScheme, control_forces, total_force
    from swarmsim.physics import step_world
    from swarmsim.tasks import (Phase, TaskStatus, evaluate_task,
                                instantiate_task)
    from swarmsim.control import InputTracker
    from swarmsim.harness import _apply_intent

    def drive(n, starts, inputs=None):
        mode = TaskMode(TaskKind.POSITION_CONTROL, n)
        state = instantiate_task(TaskKind.POSITION_CONTROL, mode, seed=0)
        state.world.robot_pos = np.array(starts, dtype=np.float64)
        ctl = PositionController()
        ctl.reset()
        tracker = InputTracker(ControlScheme.GLOBAL_FORCE)
        log = []
        for step in range(6000):
            state.phase = Phase.SIMULATION
            if inputs is None:
                from swarmsim.harness import make_view
                intent = ctl.step(make_view(state), None)
            else:
                if step >= len(inputs):
                    intent = InputState()
                else:
                    intent = InputState(np.array(inputs[step], dtype=np.float64))
            log.append(tuple(intent.key_direction))
            _apply_intent(tracker, intent)
            s = tracker.tick(state.world.dt)
            f = control_forces(state.scheme, s, state.world.robot_pos,
                               state.control_params)
            state.world = step_world(state.world, f)
            state.step += 1
            state.phase = Phase.EVALUATION
            if evaluate_task(state) is TaskStatus.COMPLETE:
                return True, log
        return False, log

    g = goal_pattern(2)
    # start placed so both straight-line paths clear the obstacle: with no
    # contacts, broadcast motion is a rigid translation
    start1 = np.array([[6.3, 3.3]])
    ok1, inputs = drive(1, start1)
    assert ok1
    # second robot co-located up to the mirrored goal offset
    start2 = np.vstack([start1[0], start1[0] + (g[1] - g[0])])
    ok2, _ = drive(2, start2, inputs=inputs)
    assert ok2


def test_run_batch_order_and_parallelism():
    configs = [vis_config(seed=s, max_steps=40) for s in range(8)]
    seq = run_batch(configs, parallelism=1)
    par = run_batch(configs, parallelism=4)
    assert seq == par
    assert [r.seed for r in seq] == list(range(8))
    assert len(seq) == 8


def test_run_batch_captures_failures():
    bad = TrialConfig(TaskKind.VARY_NUMBER, "n=3", seed=0, max_steps=10)
    good = vis_config(max_steps=10)
    records = run_batch([bad, good], parallelism=2)
    assert records[0].completed is False
    assert "error=" in records[0].mode_detail
    assert records[1].steps == 10


def make_rec(duration, completed=True, group="g"):
    return TrialRecord("exp", "p", duration, 1, f"n={group};x=1", "a", 0,
                       completed, int(duration * 60), "d")


def test_aggregate_stats_quartiles():
    rows = aggregate_stats([make_rec(d) for d in (1.0, 2.0, 3.0)], "mode")
    assert rows[0]["median"] == 2.0
    rows = aggregate_stats([make_rec(d) for d in (1.0, 2.0, 3.0, 4.0)], "mode")
    assert (rows[0]["q1"], rows[0]["median"], rows[0]["q3"]) == (1.75, 2.5, 3.25)
    assert rows[0]["min"] == 1.0 and rows[0]["max"] == 4.0


def test_aggregate_stats_incomplete_group():
    recs = [make_rec(2.0, completed=False) for _ in range(5)]
    rows = aggregate_stats(recs, "mode")
    assert rows[0]["completion_rate"] == 0.0
    assert "median" not in rows[0]
    mixed = recs + [make_rec(9.0, group="h")]
    rows = aggregate_stats(mixed, "mode")
    assert {r["group"] for r in rows} == {"n=g", "n=h"}
    with pytest.raises(ConfigurationError):
        aggregate_stats([], "mode")


def test_replay_matches_live_run():
    """Tick-aligned key events reproduce the scripted trajectory."""
    captured = []

    class Recorder(PushController):
        def step(self, view, rng):
            st = super().step(view, rng)
            captured.append((view.step, tuple(st.key_direction)))
            return st

    live = run_trial(vis_config(max_steps=900, controller_id="scripted_push"),
                     controller=Recorder())
    events = []
    seq = 0
    held = set()
    for tick, (dx, dy) in captured:
        want = {k for k, v in (("right", dx > 0), ("left", dx < 0),
                               ("up", dy > 0), ("down", dy < 0)) if v}
        for key in sorted(held - want):
            seq += 1
            events.append({"tick": tick, "type": "key_up", "key": key,
                           "client_sequence": seq})
        for key in sorted(want - held):
            seq += 1
            events.append({"tick": tick, "type": "key_down", "key": key,
                           "client_sequence": seq})
        held = want
    replayed = replay_events(vis_config(max_steps=900, controller_id="scripted_push"),
                             events)
    assert replayed.steps == live.steps
    assert replayed.completed == live.completed


def test_make_controller_registry():
    assert isinstance(make_controller("none"), NoOpController)
    assert isinstance(make_controller("scripted_push"), PushController)
    with pytest.raises(ConfigurationError):
        make_controller("nope")
