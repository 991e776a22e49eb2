"""Acceptance suite: one test per criterion, one printed line each.

Tolerances and thresholds are pinned here, not tuned elsewhere.  Lines are
written to the real stdout so they stay visible under pytest capture.
"""
import hashlib
import math
import sys
import threading
import time
from dataclasses import asdict

import numpy as np
import pytest

from oracles import brute_hull_vertices, mean_cov_oracle, pattern_void_oracle
from swarmsim import RobotBody, World, step_world
from swarmsim.control import (ControlParams, ControlScheme, InputState,
                              InputTracker, NoiseConfig, control_forces,
                              sample_noise, total_force)
from swarmsim.harness import (PositionController, PushController, TrialConfig,
                              make_controller, make_view, run_trial, _apply_intent)
from swarmsim.observe import (ObservationMode, confidence_ellipse, convex_hull,
                              swarm_covariance, swarm_mean)
from swarmsim.service import (RecordStore, SessionEngine, create_app,
                              records_from_csv, records_from_json,
                              records_to_csv, records_to_json)
from swarmsim.tasks import (Phase, TaskKind, TaskMode, TaskStatus,
                            evaluate_task, goal_pattern, instantiate_task,
                            load_scenario, mode_options)


def report(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f" :: {detail}" if detail else "")
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # compile/load the jitted kernels outside any timed window
    w = World((-5, -5, 5, 5), [RobotBody(0, np.array([0.0, 0.0]))])
    step_world(w, [[1.0, 0.0]])


def test_criterion_1_determinism():
    t0 = time.monotonic()
    tasks = [
        (TaskKind.VARY_CONTROL, TaskMode(TaskKind.VARY_CONTROL, ControlScheme.GLOBAL_FORCE)),
        (TaskKind.VARY_NOISE, TaskMode(TaskKind.VARY_NOISE, 1.0)),
        (TaskKind.POSITION_CONTROL, TaskMode(TaskKind.POSITION_CONTROL, 3)),
    ]
    ok = True
    for kind, mode in tasks:
        for seed in range(3):
            outputs = []
            for _ in range(2):
                digest = hashlib.sha256()
                cfg = TrialConfig(kind, mode, seed=seed, max_steps=300,
                                  controller_id="scripted_push"
                                  if kind is not TaskKind.POSITION_CONTROL
                                  else "scripted_position")
                rec = run_trial(cfg, state_hook=lambda s: digest.update(s.world.state_bytes()))
                outputs.append((digest.hexdigest(), rec))
            ok &= outputs[0] == outputs[1]
    elapsed = time.monotonic() - t0
    report("criterion 1: determinism (3 tasks x 3 seeds, two runs, bit-identical)",
           ok and elapsed < 60.0, f"elapsed {elapsed:.1f}s")


def test_criterion_2_terminal_speed():
    t0 = time.monotonic()
    b, dt, mass, force = 4.0, 1.0 / 60.0, 1.0, 10.0
    w = World((-50, -50, 50, 50), [RobotBody(0, np.array([-45.0, 0.0]), mass=mass)],
              damping=b, dt=dt)
    for _ in range(math.ceil(5.0 / (b * dt))):
        w = step_world(w, [[force, 0.0]])
    expect = force / (mass * b)
    speed = float(np.linalg.norm(w.robot_vel[0]))
    rel = abs(speed - expect) / expect
    elapsed = time.monotonic() - t0
    report("criterion 2: terminal speed law |F|/(m*b) within 1%",
           rel < 0.01 and elapsed < 1.0,
           f"speed {speed:.4f} vs {expect:.4f} (rel {rel:.2e}), {elapsed:.2f}s")


def test_criterion_3_rigid_translation():
    from scipy.spatial.distance import pdist
    params = ControlParams(u_max=10.0)
    robots = [RobotBody(i, np.array([-90.0 + 0.5 * (i % 10), -20.0 + 0.5 * (i // 10)]))
              for i in range(100)]
    w = World((-100, -100, 100, 100), robots)
    state = InputState(np.array([1.0, 0.0]), np.zeros(2), 2.0)
    d0 = pdist(w.robot_pos)
    for _ in range(1000):
        f = control_forces(ControlScheme.GLOBAL_FORCE, state, w.robot_pos, params)
        w = step_world(w, f)
    drift = float(np.abs(pdist(w.robot_pos) - d0).max())
    report("criterion 3: rigid translation, pairwise distances constant to 1e-9",
           drift < 1e-9, f"max drift {drift:.2e} over 1000 steps")


def test_criterion_4_hull_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(2718)
    ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        pts = rng.uniform(-10, 10, (n, 2))
        ok &= {tuple(v) for v in convex_hull(pts)} == brute_hull_vertices(pts)
    elapsed = time.monotonic() - t0
    report("criterion 4: hull equals brute-force oracle on 1000 point sets",
           ok and elapsed < 10.0, f"elapsed {elapsed:.1f}s")


def test_criterion_5_covariance_ellipse_round_trip():
    rng = np.random.default_rng(577)
    k = 2.0
    worst_rec = 0.0
    worst_mean = 0.0
    worst_cov = 0.0
    for _ in range(1000):
        a = rng.uniform(-2, 2, (2, 2))
        m = a.T @ a
        cov_in = swarm_covariance  # noqa: F841 (namespace hint only)
        from swarmsim.observe import Cov2
        e = confidence_ellipse([0, 0], Cov2(m[0, 0], m[0, 1], m[1, 1]), k=k)
        c, s = math.cos(e.orientation), math.sin(e.orientation)
        r = np.array([[c, -s], [s, c]])
        rec = r @ np.diag([e.semi_major ** 2, e.semi_minor ** 2]) @ r.T / k ** 2
        worst_rec = max(worst_rec, float(np.abs(rec - m).max()))
    for _ in range(200):
        pts = rng.uniform(-100, 100, (int(rng.integers(2, 200)), 2))
        (omx, omy), (oxx, oxy, oyy) = mean_cov_oracle(pts)
        mu = swarm_mean(pts)
        cv = swarm_covariance(pts, mu)
        scale = max(abs(omx), abs(omy), 1.0)
        worst_mean = max(worst_mean, abs(mu[0] - omx) / scale, abs(mu[1] - omy) / scale)
        cscale = max(oxx, oyy, 1.0)
        worst_cov = max(worst_cov, abs(cv.xx - oxx) / cscale,
                        abs(cv.xy - oxy) / cscale, abs(cv.yy - oyy) / cscale)
    report("criterion 5: ellipse round-trip <= 1e-9; mean/cov vs oracle <= 1e-12 rel",
           worst_rec <= 1e-9 and worst_mean <= 1e-12 and worst_cov <= 1e-12,
           f"rec {worst_rec:.1e}, mean {worst_mean:.1e}, cov {worst_cov:.1e}")


def test_criterion_6_noise_statistics():
    params = ControlParams(u_max=10.0)
    ok = True
    details = []
    for level in (0.0, 1.0, 2.0):
        rng = np.random.default_rng(4242)
        v = sample_noise(rng, 100_000, NoiseConfig(level), params)
        mags = np.hypot(v[:, 0], v[:, 1])
        bound = level * params.u_max
        ok &= float(mags.max()) <= bound
        if level > 0:
            mean_err = abs(mags.mean() - bound / 2) / (bound / 2)
            ok &= mean_err < 0.01
            details.append(f"M={level}: mean err {mean_err:.3%}")
    # zero-noise stream is identical to not sampling at all
    rng_a, rng_b = np.random.default_rng(7), np.random.default_rng(7)
    z = sample_noise(rng_a, 1000, NoiseConfig(0.0), params)
    ok &= not z.any()
    ok &= bool(np.array_equal(rng_a.uniform(size=16), rng_b.uniform(size=16)))
    report("criterion 6: noise bounds exact, mean M*u_max/2 +/- 1%, M=0 streamless",
           ok, "; ".join(details))


def test_criterion_7_broadcast_equality():
    mode = TaskMode(TaskKind.VARY_VISUALIZATION, ObservationMode.FULL_STATE)
    state = instantiate_task(TaskKind.VARY_VISUALIZATION, mode, seed=11)
    controller = PushController()
    controller.reset()
    tracker = InputTracker(state.scheme)
    n = state.world.n_robots
    ok = True
    for _ in range(1000):
        state.phase = Phase.SIMULATION
        intent = controller.step(make_view(state), None)
        _apply_intent(tracker, intent)
        forces = control_forces(state.scheme, tracker.tick(state.world.dt),
                                state.world.robot_pos, state.control_params)
        ok &= forces.tobytes() == np.tile(forces[0], (n, 1)).tobytes()
        state.world = step_world(state.world, forces)
        state.step += 1
        state.phase = Phase.EVALUATION
        if evaluate_task(state) is TaskStatus.COMPLETE:
            break
    report("criterion 7: broadcast forces byte-equal across robots every step",
           ok, f"checked {state.step} steps")


def test_criterion_8_task_structure():
    ctl = instantiate_task(TaskKind.VARY_CONTROL,
                           TaskMode(TaskKind.VARY_CONTROL, ControlScheme.ATTRACTIVE_POINT), 0)
    vis = instantiate_task(TaskKind.VARY_VISUALIZATION,
                           TaskMode(TaskKind.VARY_VISUALIZATION, ObservationMode.MEAN), 0)
    counts = mode_options(TaskKind.VARY_NUMBER)
    products = set()
    for n in counts:
        st = instantiate_task(TaskKind.VARY_NUMBER, TaskMode(TaskKind.VARY_NUMBER, n), 0)
        products.add(round(n * st.control_params.u_max, 6))
    sc = load_scenario().data["tasks"]["position_control"]
    hollow_ok = all(
        pattern_void_oracle(goal_pattern(n), sc["pattern_spacing"],
                            np.array(sc["pattern_anchor"])) == (n >= 5)
        for n in range(1, 11))
    ok = (ctl.world.n_robots == 16 and ctl.world.n_workpieces == 3
          and vis.world.n_robots == 100
          and min(counts) == 1 and max(counts) == 500 and len(products) == 1
          and hollow_ok)
    report("criterion 8: task structure (16+3 blocks, 100 robots, 1-500 const force, "
           "pattern hollow iff n>=5)", ok,
           f"counts {counts}, n*u_max {products}")


def test_criterion_9_scripted_completion():
    t0 = time.monotonic()
    push_done = 0
    for seed in range(20):
        cfg = TrialConfig(TaskKind.VARY_VISUALIZATION,
                          TaskMode(TaskKind.VARY_VISUALIZATION, ObservationMode.FULL_STATE),
                          seed=seed, max_steps=4000, controller_id="scripted_push")
        push_done += run_trial(cfg).completed
    pos_done = {}
    for n in (1, 2, 3, 4):
        pos_done[n] = 0
        for seed in range(20):
            cfg = TrialConfig(TaskKind.POSITION_CONTROL,
                              TaskMode(TaskKind.POSITION_CONTROL, n),
                              seed=seed, max_steps=6000,
                              controller_id="scripted_position")
            pos_done[n] += run_trial(cfg).completed
    elapsed = time.monotonic() - t0
    ok = push_done >= 18 and all(v >= 18 for v in pos_done.values()) and elapsed < 300.0
    report("criterion 9: scripted completion (push >= 18/20 in 4000; "
           "position n<=4 >= 18/20 in 6000; < 5 min)", ok,
           f"push {push_done}/20, position {pos_done}, {elapsed:.0f}s")


def test_criterion_10_noise_degrades_performance():
    medians = {}
    for level in (0.0, 2.0):
        steps = []
        for seed in range(50):
            cfg = TrialConfig(TaskKind.VARY_NOISE, TaskMode(TaskKind.VARY_NOISE, level),
                              seed=seed, max_steps=6000, controller_id="scripted_push")
            steps.append(run_trial(cfg).steps)
        medians[level] = float(np.median(steps))
    ok = medians[2.0] >= medians[0.0]
    report("criterion 10: median steps at M=2 >= M=0 over 50 seeds", ok,
           f"medians {medians}; human-player baseline at max noise: "
           "~40% slower (informational, not asserted)")


def test_criterion_11_observation_budgets():
    budgets = {}
    for mode, expect in ((ObservationMode.FULL_STATE, ("==", 200)),
                         (ObservationMode.CONVEX_HULL, ("<=", 200)),
                         (ObservationMode.MEAN, ("==", 2)),
                         (ObservationMode.MEAN_VARIANCE, ("==", 7))):
        cfg = TrialConfig(TaskKind.VARY_VISUALIZATION,
                          TaskMode(TaskKind.VARY_VISUALIZATION, mode),
                          seed=2, max_steps=10, controller_id="human",
                          participant_id="tok")
        engine = SessionEngine(cfg)
        frame = None
        while frame is None:
            frame = engine.tick()
        got = len(frame["observation"]["scalars"])
        budgets[mode.value] = got
        op, val = expect
        assert (got == val) if op == "==" else (got <= val), (mode, got)
    report("criterion 11: frame scalar budgets 2n / <=2n / 2 / 7 at n=100",
           True, f"{budgets}")


def test_criterion_12_store_integrity(tmp_path):
    path = tmp_path / "records.jsonl"
    store = RecordStore(path)
    app = create_app(store)
    from fastapi.testclient import TestClient
    ok = True
    with TestClient(app) as client:
        def post(k):
            return client.post("/results", json=dict(
                experiment_name="vary_noise", participant_id=f"tok-{k}",
                duration=1.0 + k, num_robots=100, mode_detail="M=0.5;k=2.0",
                agent="acc", seed=k, completed=True, steps=60 * (k + 1),
                scenario_digest="d")).status_code

        codes = []
        threads = [threading.Thread(target=lambda k=k: codes.append(post(k)))
                   for k in range(100)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        ok &= codes.count(201) == 100
        csv_text = client.get("/results.csv").text
        json_text = records_to_json(store.records())
    ok &= len(store.records()) == 100
    ok &= records_to_csv(records_from_csv(csv_text)) == csv_text
    ok &= records_to_json(records_from_json(json_text)) == json_text
    before = store.records()
    store.close()
    reopened = RecordStore(path)
    ok &= reopened.records() == before
    # replayed index keeps suppressing the same duplicates
    ok &= reopened.append(asdict(before[3])) == 3
    ok &= len(reopened.records()) == 100
    reopened.close()
    report("criterion 12: 100 concurrent posts persisted, byte-stable exports, "
           "restart replay exact", ok)
