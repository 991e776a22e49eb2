"""The four feedback levels, rendered side by side for one swarm state.

Full state shows every robot; the reducers compress the same swarm down
to a hull, a mean, or a mean plus confidence ellipse (what a player would
see in the corresponding trial mode).
"""
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Ellipse as MplEllipse
import numpy as np

from swarmsim import (ObservationMode, TaskKind, TaskMode, instantiate_task,
                      make_observation, observation_scalars)

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

state = instantiate_task(TaskKind.VARY_VISUALIZATION,
                         TaskMode(TaskKind.VARY_VISUALIZATION, ObservationMode.FULL_STATE),
                         seed=3)
pts = state.world.robot_pos + np.random.default_rng(0).normal(0, 0.35, (100, 2))
radius = float(state.world.robot_radius[0])

fig, axes = plt.subplots(1, 4, figsize=(16, 4), sharex=True, sharey=True)
for ax, mode in zip(axes, ObservationMode):
    obs = make_observation(mode, pts, radius)
    n_scalars = len(observation_scalars(obs))
    ax.set_title(f"{mode.value} ({n_scalars} scalars)")
    if mode is ObservationMode.FULL_STATE:
        for p in obs.positions:
            ax.add_patch(Circle(p, radius, color="tab:blue", alpha=0.7))
    elif mode is ObservationMode.CONVEX_HULL:
        hull = np.vstack([obs.vertices, obs.vertices[:1]])
        ax.plot(hull[:, 0], hull[:, 1], "tab:blue")
    elif mode is ObservationMode.MEAN:
        ax.plot(*obs.point, "x", ms=12, mew=3, color="tab:blue")
    else:
        ax.plot(*obs.point, "x", ms=12, mew=3, color="tab:blue")
        e = obs.ellipse
        ax.add_patch(MplEllipse(e.center, 2 * e.semi_major, 2 * e.semi_minor,
                                angle=np.degrees(e.orientation),
                                fill=False, color="tab:blue", lw=2))
    ax.set_aspect("equal")
    ax.set_xlim(pts[:, 0].min() - 1, pts[:, 0].max() + 1)
    ax.set_ylim(pts[:, 1].min() - 1, pts[:, 1].max() + 1)

fig.suptitle("One swarm, four feedback levels")
fig.savefig(OUT / "observation_modes.png", dpi=120, bbox_inches="tight")
print(f"wrote {OUT / 'observation_modes.png'}")
