"""Reduce full swarm state to one of four feedback levels: full state,
convex hull, mean, or mean plus a covariance confidence ellipse.

The hull is a minimal ccw vertex cycle computed by monotone chain; the
orientation predicate falls back to exact rational arithmetic near ties,
so collinear points are excluded robustly.  Covariance is the population
(1/n) form so a single robot is well-defined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError

# Shewchuk-style static filter constant for the 2x2 orientation determinant
_ORIENT_EPS = 3.3306690738754716e-16


class ObservationMode(Enum):
    FULL_STATE = "full_state"
    CONVEX_HULL = "convex_hull"
    MEAN = "mean"
    MEAN_VARIANCE = "mean_variance"


@dataclass(frozen=True)
class Cov2:
    xx: float
    xy: float
    yy: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_major: float
    semi_minor: float
    orientation: float  # principal-axis angle, in (-pi/2, pi/2]


@dataclass(frozen=True)
class FullStateObs:
    positions: np.ndarray
    radius: float


@dataclass(frozen=True)
class HullObs:
    vertices: np.ndarray  # ccw minimal cycle, subset of the input points


@dataclass(frozen=True)
class MeanObs:
    point: tuple[float, float]


@dataclass(frozen=True)
class MeanVarObs:
    point: tuple[float, float]
    cov: Cov2
    ellipse: Ellipse


Observation = FullStateObs | HullObs | MeanObs | MeanVarObs


def _orient(a, b, c) -> int:
    """Sign of the ccw turn a->b->c; exact (rational fallback near ties)."""
    t1 = (b[0] - a[0]) * (c[1] - a[1])
    t2 = (b[1] - a[1]) * (c[0] - a[0])
    det = t1 - t2
    bound = _ORIENT_EPS * (abs(t1) + abs(t2))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    # doubles are exact rationals, so this branch is exact
    e1 = (Fraction(b[0]) - Fraction(a[0])) * (Fraction(c[1]) - Fraction(a[1]))
    e2 = (Fraction(b[1]) - Fraction(a[1])) * (Fraction(c[0]) - Fraction(a[0]))
    d = e1 - e2
    return (d > 0) - (d < 0)


def convex_hull(points) -> np.ndarray:
    """Minimal ccw hull cycle; collinear interior points excluded.

    One or two distinct points come back as-is (degenerate hull); output
    vertices are exact input points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] != 2:
        raise ConfigurationError("convex_hull needs at least one (x, y) point")
    uniq = sorted({(float(x), float(y)) for x, y in pts})
    if len(uniq) == 1:
        return np.array(uniq)
    if len(uniq) == 2:
        return np.array(uniq)

    def chain(seq):
        out: list[tuple[float, float]] = []
        for p in seq:
            while len(out) > 1 and _orient(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    cycle = lower[:-1] + upper[:-1]
    if len(cycle) < 3:  # all points collinear: keep the two extremes
        return np.array([uniq[0], uniq[-1]])
    return np.array(cycle)


def swarm_mean(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 1:
        raise ConfigurationError("swarm_mean needs at least one point")
    return pts.mean(axis=0)


def swarm_covariance(points, mean=None) -> Cov2:
    """Population covariance (divide by n); zero matrix for n = 1."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 1:
        raise ConfigurationError("swarm_covariance needs at least one point")
    mu = swarm_mean(pts) if mean is None else np.asarray(mean, dtype=np.float64)
    d = pts - mu
    n = pts.shape[0]
    return Cov2(float((d[:, 0] ** 2).sum() / n),
                float((d[:, 0] * d[:, 1]).sum() / n),
                float((d[:, 1] ** 2).sum() / n))


def confidence_ellipse(mean, cov: Cov2, k: float = 2.0) -> Ellipse:
    """k-sigma level set of the covariance: semi-axes k*sqrt(eigenvalues),
    orientation = principal-axis angle in (-pi/2, pi/2] (0 when isotropic)."""
    tr = cov.xx + cov.yy
    half_diff = 0.5 * (cov.xx - cov.yy)
    root = math.hypot(half_diff, cov.xy)
    l1 = 0.5 * tr + root
    l2 = 0.5 * tr - root
    l1 = max(l1, 0.0)
    l2 = max(l2, 0.0)
    if root == 0.0:
        theta = 0.0
    else:
        theta = 0.5 * math.atan2(2.0 * cov.xy, cov.xx - cov.yy)
    mean = np.asarray(mean, dtype=np.float64)
    return Ellipse((float(mean[0]), float(mean[1])),
                   k * math.sqrt(l1), k * math.sqrt(l2), theta)


def make_observation(mode: ObservationMode, positions, radius: float,
                     k: float = 2.0) -> Observation:
    """Dispatch to the reducer for `mode`; positions must be nonempty."""
    pts = np.asarray(positions, dtype=np.float64)
    if pts.shape[0] < 1:
        raise ConfigurationError("cannot observe an empty swarm")
    if mode is ObservationMode.FULL_STATE:
        return FullStateObs(pts.copy(), float(radius))
    if mode is ObservationMode.CONVEX_HULL:
        return HullObs(convex_hull(pts))
    mu = swarm_mean(pts)
    if mode is ObservationMode.MEAN:
        return MeanObs((float(mu[0]), float(mu[1])))
    if mode is ObservationMode.MEAN_VARIANCE:
        cov = swarm_covariance(pts, mu)
        return MeanVarObs((float(mu[0]), float(mu[1])), cov,
                          confidence_ellipse(mu, cov, k))
    raise ConfigurationError(f"unknown observation mode {mode}")


def observation_scalars(obs: Observation) -> list[float]:
    """Flat scalar payload as sent in session frames.

    Full state: 2n position scalars.  Hull: 2 per vertex (at most 2n).
    Mean: 2.  Mean+variance: 7 (mean, covariance triple, ellipse semi-axes;
    the ellipse orientation is the covariance principal angle and is
    recovered client-side from the triple).
    """
    if isinstance(obs, FullStateObs):
        return [float(v) for v in obs.positions.ravel()]
    if isinstance(obs, HullObs):
        return [float(v) for v in obs.vertices.ravel()]
    if isinstance(obs, MeanObs):
        return [obs.point[0], obs.point[1]]
    if isinstance(obs, MeanVarObs):
        return [obs.point[0], obs.point[1], obs.cov.xx, obs.cov.xy,
                obs.cov.yy, obs.ellipse.semi_major, obs.ellipse.semi_minor]
    raise ConfigurationError(f"not an observation: {obs!r}")
