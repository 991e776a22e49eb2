"""Push a hexagonal workpiece into a goal region with 100 robots.

Runs one scripted trial of the push course and draws the resulting
trajectories: swarm center, workpiece path, obstacle, and goal region.
Run from the repo root:  python3 demos/01_push_through_course.py
"""
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from swarmsim import (ObservationMode, TaskKind, TaskMode, TrialConfig,
                      run_trial)

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

mode = TaskMode(TaskKind.VARY_VISUALIZATION, ObservationMode.FULL_STATE)
config = TrialConfig(TaskKind.VARY_VISUALIZATION, mode, seed=0,
                     max_steps=4000, controller_id="scripted_push")

mean_path = []
object_path = []
snapshots = {}


def hook(state):
    mean_path.append(state.world.robot_pos.mean(axis=0))
    object_path.append(state.world.wp_pos[0].copy())
    if state.step in (1, 120, 240, 360):
        snapshots[state.step] = state.world.robot_pos.copy()


record = run_trial(config, state_hook=hook)
print(f"completed={record.completed} in {record.steps} steps "
      f"({record.duration:.1f} s simulated)")

mean_path = np.array(mean_path)
object_path = np.array(object_path)

fig, ax = plt.subplots(figsize=(10, 6))
ax.plot(mean_path[:, 0], mean_path[:, 1], label="swarm mean", lw=2)
ax.plot(object_path[:, 0], object_path[:, 1], label="workpiece", lw=2)
for step, pos in snapshots.items():
    ax.scatter(pos[:, 0], pos[:, 1], s=4, alpha=0.35, label=f"robots @ step {step}")
from swarmsim import load_scenario
course = load_scenario().data["tasks"]["vary_visualization"]
goal = np.array(course["goal_region"] + course["goal_region"][:1])
obst = np.array(course["obstacle"] + course["obstacle"][:1])
ax.plot(goal[:, 0], goal[:, 1], "g--", label="goal region")
ax.fill(obst[:, 0], obst[:, 1], color="gray", alpha=0.6, label="obstacle")
ax.set_xlim(0, 20)
ax.set_ylim(0, 12)
ax.set_aspect("equal")
ax.legend(loc="lower left", fontsize=8)
ax.set_title("Scripted broadcast push: swarm herds the hexagon to the goal")
fig.savefig(OUT / "push_course.png", dpi=120, bbox_inches="tight")
print(f"wrote {OUT / 'push_course.png'}")
