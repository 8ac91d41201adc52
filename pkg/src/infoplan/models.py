"""World models: object motion, agent kinematics and the RSSI sensor.

Particle and ground-truth states share one array layout so the filter and the
simulator run the same propagation code. Each row is::

    [x, y, vx, vy, turn_rate, mode]

with ``turn_rate`` the non-negative turn-rate magnitude in rad/s and ``mode``
0 (straight), 1 (turn left, counter-clockwise) or 2 (turn right).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .errors import DegenerateLikelihoodError, ModelMismatchError, SingularityError

X, Y, VX, VY, OMEGA, MODE = range(6)
STATE_DIM = 6

V_MAX = 15.0
A_MAX = 4.0
AGENT_ALTITUDE = 50.0

# Row c1, c2, c3 of the infrequent-turning mode transition matrix.
CV_IFT_TRANSITION = np.array(
    [
        [0.975, 0.0125, 0.0125],
        [0.225, 0.775, 0.0],
        [0.225, 0.0, 0.775],
    ]
)

# Depression angle (deg) below the horizon -> gain (dB) for a vertical
# monopole carried by the agent; the null sits directly below the airframe.
MONOPOLE_GAIN_TABLE = (
    (0.0, 0.0),
    (30.0, -0.5),
    (45.0, -1.2),
    (60.0, -2.5),
    (75.0, -4.0),
    (90.0, -6.0),
)


@dataclass
class ObjectState:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    turn_rate: float = 0.0
    mode: int = 0
    altitude: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    def to_row(self) -> np.ndarray:
        return np.array(
            [*self.position, *self.velocity, self.turn_rate, float(self.mode)]
        )

    @classmethod
    def from_row(cls, row, altitude: float = 0.0) -> "ObjectState":
        return cls(
            position=np.array(row[X : Y + 1]),
            velocity=np.array(row[VX : VY + 1]),
            turn_rate=float(row[OMEGA]),
            mode=int(row[MODE]),
            altitude=altitude,
        )


class Action(IntEnum):
    """Eight admissible headings, counter-clockwise from east in 45 deg steps."""

    EAST = 0
    NORTHEAST = 1
    NORTH = 2
    NORTHWEST = 3
    WEST = 4
    SOUTHWEST = 5
    SOUTH = 6
    SOUTHEAST = 7

    @property
    def angle(self) -> float:
        return self.value * math.pi / 4.0

    @property
    def unit(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])


@dataclass(frozen=True)
class AgentState:
    position: np.ndarray
    altitude: float = AGENT_ALTITUDE
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    commanded_heading: float = 0.0

    @property
    def position3(self) -> np.ndarray:
        return np.array([self.position[0], self.position[1], self.altitude])

    @property
    def speed(self) -> float:
        return math.hypot(self.velocity[0], self.velocity[1])


@dataclass(frozen=True)
class MotionModel:
    """Object dynamics.

    ``process_noise`` is ``(position_std, velocity_std)`` applied per axis per
    step. ``kind`` is one of ``"RW"``, ``"CV"`` or ``"CV-IFT"``.
    """

    kind: str = "CV"
    process_noise: tuple[float, float] = (0.0, 0.0)
    imm_transition: np.ndarray = field(default_factory=lambda: CV_IFT_TRANSITION.copy())
    dt: float = 1.0

    def __post_init__(self):
        if self.kind not in ("RW", "CV", "CV-IFT"):
            raise ValueError(f"unknown motion model kind {self.kind!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        trans = np.asarray(self.imm_transition, dtype=float)
        if trans.shape != (3, 3) or np.any(trans < 0):
            raise ValueError("imm_transition must be a non-negative 3x3 matrix")
        if np.any(np.abs(trans.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("imm_transition rows must each sum to 1")
        object.__setattr__(self, "imm_transition", trans)
        pos_std, vel_std = self.process_noise
        if pos_std < 0 or vel_std < 0:
            raise ValueError("process noise must be non-negative")

    def inflated(self, factor: float) -> "MotionModel":
        pos_std, vel_std = self.process_noise
        return replace(self, process_noise=(pos_std * factor, vel_std * factor))


@dataclass(frozen=True)
class RssiModel:
    p_ref: float = -7.0
    d0: float = 1.0
    path_loss_n: float = 1.5
    noise_var: float = 2.5**2
    antenna: str = "monopole"
    gain_table: tuple = MONOPOLE_GAIN_TABLE

    def __post_init__(self):
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        if self.noise_var < 0:
            raise ValueError("noise_var must be non-negative")
        if self.antenna not in ("monopole", "isotropic"):
            raise ValueError(f"unknown antenna pattern {self.antenna!r}")

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.noise_var)


@dataclass(frozen=True)
class Measurement:
    value: float
    source_id: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("measurement value must be finite")


def _check_modes(modes: np.ndarray, model: MotionModel) -> None:
    if model.kind == "CV-IFT":
        bad = (modes != 0) & (modes != 1) & (modes != 2)
    else:
        bad = modes != 0
    if np.any(bad):
        raise ModelMismatchError(
            f"mode {modes[bad][0]!r} is not defined for a {model.kind} model"
        )


def propagate_states(
    states: np.ndarray, model: MotionModel, rng: np.random.Generator
) -> np.ndarray:
    """Advance an ``(N, 6)`` state array by ``model.dt``; returns a new array."""
    dt = model.dt
    out = np.array(states, dtype=float, copy=True)
    n = out.shape[0]
    _check_modes(out[:, MODE], model)
    pos_std, vel_std = model.process_noise

    if model.kind == "RW":
        out[:, VX:VY + 1] = 0.0
    elif model.kind == "CV":
        out[:, X:Y + 1] += out[:, VX:VY + 1] * dt
        if vel_std > 0:
            out[:, VX:VY + 1] += vel_std * rng.standard_normal((n, 2))
    else:
        cum = np.cumsum(model.imm_transition, axis=1)
        cum[:, -1] = 1.0
        rows = cum[out[:, MODE].astype(np.intp)]
        u = rng.random(n)
        out[:, MODE] = (u[:, None] >= rows).sum(axis=1)
        omega = np.where(out[:, MODE] == 1, out[:, OMEGA], 0.0)
        omega = np.where(out[:, MODE] == 2, -out[:, OMEGA], omega)
        vx = out[:, VX].copy()
        vy = out[:, VY].copy()
        theta = omega * dt
        turning = np.abs(theta) > 1e-12
        s = np.sin(theta)
        c = np.cos(theta)
        w = np.where(turning, omega, 1.0)
        out[:, X] += np.where(turning, (vx * s - vy * (1 - c)) / w, vx * dt)
        out[:, Y] += np.where(turning, (vx * (1 - c) + vy * s) / w, vy * dt)
        out[:, VX] = vx * c - vy * s
        out[:, VY] = vx * s + vy * c
        if vel_std > 0:
            out[:, VX:VY + 1] += vel_std * rng.standard_normal((n, 2))
    if pos_std > 0:
        out[:, X:Y + 1] += pos_std * rng.standard_normal((n, 2))
    return out


def propagate_object(
    state: ObjectState, model: MotionModel, rng: np.random.Generator
) -> ObjectState:
    row = propagate_states(state.to_row()[None, :], model, rng)[0]
    return ObjectState.from_row(row, altitude=state.altitude)


def propagate_agent(
    state: AgentState,
    action: Action,
    dt: float,
    v_max: float = V_MAX,
    a_max: float = A_MAX,
) -> AgentState:
    """Head along ``action`` accelerating at ``a_max`` up to ``v_max``.

    Heading changes are instantaneous. The speed profile is piecewise linear
    (accelerate, then cruise), so integrating each piece with the trapezoid
    rule is exact.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    action = Action(action)
    s0 = min(state.speed, v_max)
    if s0 + a_max * dt <= v_max:
        s1 = s0 + a_max * dt
        dist = 0.5 * (s0 + s1) * dt
    else:
        t_sat = (v_max - s0) / a_max
        s1 = v_max
        dist = 0.5 * (s0 + v_max) * t_sat + v_max * (dt - t_sat)
    unit = action.unit
    return replace(
        state,
        position=np.asarray(state.position, dtype=float) + dist * unit,
        velocity=s1 * unit,
        commanded_heading=action.angle,
    )


@lru_cache(maxsize=16)
def _gain_table_nodes(table: tuple) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(table, dtype=float)
    xs, gains = np.sin(np.radians(arr[:, 0])) ** 2, arr[:, 1]
    xs.flags.writeable = False
    gains.flags.writeable = False
    return xs, gains


def _gain_nodes(model: RssiModel) -> tuple[np.ndarray, np.ndarray]:
    return _gain_table_nodes(tuple(map(tuple, model.gain_table)))


def antenna_gain(depression_deg, model: RssiModel):
    """Gain (dB) at a depression angle below the horizon.

    Table nodes are keyed by angle; values between nodes are interpolated
    linearly in the squared sine of the angle.
    """
    depression = np.asarray(depression_deg, dtype=float)
    if model.antenna == "isotropic":
        return np.zeros_like(depression)
    xs, gains = _gain_nodes(model)
    return np.interp(np.sin(np.radians(depression)) ** 2, xs, gains)


def power_at(
    xy: np.ndarray, agent_pos3, model: RssiModel, object_altitude: float = 0.0
) -> np.ndarray:
    """Noiseless received power (dB) for an ``(N, 2)`` array of source positions."""
    xy = np.asarray(xy, dtype=float)
    dx = xy[..., 0] - agent_pos3[0]
    dy = xy[..., 1] - agent_pos3[1]
    dz2 = (object_altitude - agent_pos3[2]) ** 2
    dist2 = dx * dx + dy * dy + dz2
    if dist2.min() <= 0.0:
        raise SingularityError("source and receiver positions coincide")
    # 10*n*log10(d/d0) == 5*n*log10(d^2/d0^2)
    p = model.p_ref - 5.0 * model.path_loss_n * np.log10(dist2 / (model.d0 * model.d0))
    if model.antenna != "isotropic":
        xs, gains = _gain_nodes(model)
        p += np.interp(dz2 / dist2, xs, gains)
    return p


def received_power(object_pos, agent_pos, model: RssiModel) -> float:
    """Noiseless received power (dB) between two 3-D positions."""
    obj = np.asarray(object_pos, dtype=float)
    agent = np.asarray(agent_pos, dtype=float)
    return float(power_at(obj[None, :2], agent, model, object_altitude=obj[2])[0])


def measure(
    object_pos,
    agent_pos,
    model: RssiModel,
    rng: np.random.Generator,
    source_id: int = 0,
    timestamp: float = 0.0,
) -> Measurement:
    value = received_power(object_pos, agent_pos, model)
    if model.noise_var > 0:
        value += model.noise_std * rng.standard_normal()
    return Measurement(value=value, source_id=source_id, timestamp=timestamp)


def gaussian_logpdf(z, mean, var: float):
    if not var > 0:
        raise DegenerateLikelihoodError("likelihood needs noise_var > 0")
    r = np.asarray(z, dtype=float) - mean
    return -0.5 * (r * r / var + math.log(2.0 * math.pi * var))


def measurement_likelihood(z, object_pos, agent_pos, model: RssiModel) -> float:
    value = z.value if isinstance(z, Measurement) else float(z)
    mean = received_power(object_pos, agent_pos, model)
    return float(np.exp(gaussian_logpdf(value, mean, model.noise_var)))
