"""Scenario geometry tour: the S-maze at several population sizes and the
block-letter goal patterns with their solid-to-hollow switch at n = 5.
"""
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from swarmsim import TaskKind, TaskMode, goal_pattern, instantiate_task

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

fig, axes = plt.subplots(1, 3, figsize=(18, 4.2))
for ax, n in zip(axes, (20, 130, 500)):
    st = instantiate_task(TaskKind.VARY_NUMBER, TaskMode(TaskKind.VARY_NUMBER, n), seed=1)
    w = st.world
    ax.scatter(w.robot_pos[:, 0], w.robot_pos[:, 1], s=3)
    for verts in w.obstacles:
        poly = np.vstack([verts, verts[:1]])
        ax.fill(poly[:, 0], poly[:, 1], color="gray", alpha=0.7)
    hexagon = np.vstack([w.workpiece_world_vertices(0),
                         w.workpiece_world_vertices(0)[:1]])
    ax.fill(hexagon[:, 0], hexagon[:, 1], color="tab:green", alpha=0.8)
    goal = np.vstack([st.goal.region, st.goal.region[:1]])
    ax.plot(goal[:, 0], goal[:, 1], "g--")
    ax.set_title(f"S-maze course, n={n} (u_max={st.control_params.u_max:.1f} N)")
    ax.set_aspect("equal")
    ax.set_xlim(0, 20)
    ax.set_ylim(0, 12)
fig.savefig(OUT / "maze_populations.png", dpi=120, bbox_inches="tight")

fig, axes = plt.subplots(2, 5, figsize=(15, 6), sharex=True, sharey=True)
for ax, n in zip(axes.ravel(), range(1, 11)):
    pts = goal_pattern(n)
    ax.scatter(pts[:, 0], pts[:, 1], s=180, facecolors="none",
               edgecolors="tab:red", linewidths=2)
    ax.set_title(f"n={n}" + (" (hollow)" if n >= 5 else ""))
    ax.set_aspect("equal")
fig.suptitle("Goal patterns: subsets of a 10-point block letter")
fig.savefig(OUT / "goal_patterns.png", dpi=120, bbox_inches="tight")
print(f"wrote {OUT / 'maze_populations.png'} and {OUT / 'goal_patterns.png'}")
