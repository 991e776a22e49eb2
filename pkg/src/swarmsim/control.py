"""Broadcast control: turn key/pointer intent into per-robot forces.

Three schemes share one control authority u_max: a global force copied to
every robot, and attractive/repulsive point fields whose magnitude is the
same ramped value (distance-independent, so total authority is comparable
across schemes).  The ramp rises linearly from zero to u_max over
`ramp_time` while the input is held, and restarts whenever the active
direction changes or is released.

Per-robot Brownian perturbations are uniform in magnitude on
[0, level * u_max] and uniform in heading, redrawn independently every
step from the trial's generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError


class ControlScheme(Enum):
    GLOBAL_FORCE = "global"
    ATTRACTIVE_POINT = "attract"
    REPULSIVE_POINT = "repulse"


@dataclass(frozen=True)
class ControlParams:
    u_max: float
    ramp_time: float = 1.0
    attract_epsilon: float = 0.3  # dead zone radius around the pointer

    def __post_init__(self):
        if self.u_max <= 0 or self.ramp_time <= 0:
            raise ConfigurationError("u_max and ramp_time must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    """`level` is the noise bound as a fraction of control authority."""
    level: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.level <= 2.0:
            raise ConfigurationError("noise level must be in [0, 2]")


@dataclass
class InputState:
    key_direction: np.ndarray = field(default_factory=lambda: np.zeros(2))
    pointer: np.ndarray = field(default_factory=lambda: np.zeros(2))
    held_duration: float = 0.0
    # intent plumbing for pointer schemes; ignored by control_forces
    pointer_engaged: bool = False


def ramp_magnitude(held_duration: float, params: ControlParams) -> float:
    """Linear force ramp: zero at press, u_max after ramp_time."""
    if held_duration < 0:
        raise ConfigurationError("held_duration must be >= 0")
    return params.u_max * min(held_duration / params.ramp_time, 1.0)


def control_forces(scheme: ControlScheme, input_state: InputState,
                   positions: np.ndarray, params: ControlParams) -> np.ndarray:
    """Per-robot force vectors for one tick; every magnitude <= u_max."""
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    if n < 1:
        raise ConfigurationError("positions must be nonempty")
    mag = ramp_magnitude(input_state.held_duration, params)

    if scheme is ControlScheme.GLOBAL_FORCE:
        d = np.asarray(input_state.key_direction, dtype=np.float64)
        norm = math.hypot(d[0], d[1])
        if norm == 0.0 or mag == 0.0:
            return np.zeros((n, 2))
        unit = d / norm
        # one row, copied exactly to every robot
        return np.tile(unit * mag, (n, 1))

    delta = np.asarray(input_state.pointer, dtype=np.float64) - positions
    dist = np.sqrt((delta ** 2).sum(axis=1))
    out = np.zeros((n, 2))
    live = dist >= params.attract_epsilon
    if mag != 0.0 and live.any():
        out[live] = delta[live] / dist[live, None] * mag
    if scheme is ControlScheme.REPULSIVE_POINT:
        out = -out
    elif scheme is not ControlScheme.ATTRACTIVE_POINT:
        raise ConfigurationError(f"unknown control scheme {scheme}")
    return out


def sample_noise(rng: np.random.Generator, n: int, noise: NoiseConfig,
                 params: ControlParams) -> np.ndarray:
    """n perturbation vectors (m_i cos psi_i, m_i sin psi_i).

    Draw order is fixed (all magnitudes, then all headings).  With
    level == 0 the generator is not consumed at all, so a zero-noise trial
    has the same stream as a noiseless one.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    bound = noise.level * params.u_max
    if bound == 0.0:
        return np.zeros((n, 2))
    m = rng.uniform(0.0, bound, n)
    psi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.stack([m * np.cos(psi), m * np.sin(psi)], axis=1)


def total_force(control: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Elementwise sum of control and noise forces."""
    control = np.asarray(control, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if control.shape != noise.shape:
        raise ConfigurationError(
            f"control {control.shape} and noise {noise.shape} shapes differ")
    return control + noise


_KEY_VECTORS = {
    "left": (-1, 0), "right": (1, 0), "down": (0, -1), "up": (0, 1),
}


class InputTracker:
    """Integrates key/pointer events into the per-tick InputState.

    The held-duration clock follows the scheme's active input: key
    direction for the global scheme, pointer engagement for the point
    schemes.  It resets whenever the active direction changes or drops to
    zero, which is what makes tapping give fine control.
    """

    def __init__(self, scheme: ControlScheme = ControlScheme.GLOBAL_FORCE):
        self.scheme = scheme
        self._keys: set[str] = set()
        self._pointer = np.zeros(2)
        self._pointer_engaged = False
        self._held = 0.0
        self._prev_direction = (0, 0)
        self._prev_engaged = False

    def key_down(self, key: str) -> None:
        if key not in _KEY_VECTORS:
            raise ConfigurationError(f"unknown key {key!r}")
        self._keys.add(key)

    def key_up(self, key: str) -> None:
        self._keys.discard(key)

    def pointer_move(self, x: float, y: float) -> None:
        self._pointer = np.array([float(x), float(y)])

    def pointer_down(self, x: float | None = None, y: float | None = None) -> None:
        if x is not None:
            self.pointer_move(x, y)
        self._pointer_engaged = True

    def pointer_up(self) -> None:
        self._pointer_engaged = False

    def direction(self) -> tuple[int, int]:
        dx = sum(_KEY_VECTORS[k][0] for k in self._keys)
        dy = sum(_KEY_VECTORS[k][1] for k in self._keys)
        return (max(-1, min(1, dx)), max(-1, min(1, dy)))

    def tick(self, dt: float) -> InputState:
        """State for this tick; the hold clock then advances by dt."""
        direction = self.direction()
        if self.scheme is ControlScheme.GLOBAL_FORCE:
            active = direction != (0, 0)
            if not active or direction != self._prev_direction:
                self._held = 0.0
            self._prev_direction = direction
        else:
            active = self._pointer_engaged
            if not active:
                self._held = 0.0
            self._prev_engaged = active
        state = InputState(np.array(direction, dtype=np.float64),
                           self._pointer.copy(), self._held)
        if active:
            self._held += dt
        return state
