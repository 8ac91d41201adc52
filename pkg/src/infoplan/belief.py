"""Bernoulli particle filter for one radio source.

The spatial density is a weighted particle set; existence is tracked as a
single Bernoulli probability. With a CV-IFT motion model the mode column of
every particle switches under the IMM transition matrix, which gives the
IMM particle filter variant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateUpdateError
from .models import (
    OMEGA,
    STATE_DIM,
    VX,
    VY,
    X,
    Y,
    AgentState,
    Measurement,
    MotionModel,
    RssiModel,
    gaussian_logpdf,
    power_at,
    propagate_states,
)

COLUMNS = ("x", "y", "vx", "vy", "turn_rate", "mode")
JSON_FORMAT = "infoplan.belief/1"


@dataclass(frozen=True)
class FilterParams:
    p_survival: float = 0.99
    p_birth: float = 0.01
    p_detect: float = 0.9
    # Clutter intensity per dB of measurement space; only enters the existence update.
    clutter_intensity: float = 1e-4
    resample_fraction: float = 0.5
    jitter: bool = True
    jitter_scale: float = 0.01


@dataclass
class ParticleBelief:
    states: np.ndarray
    weights: np.ndarray
    existence: float
    model: MotionModel
    altitude: float = 0.0
    params: FilterParams = field(default_factory=FilterParams)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != STATE_DIM:
            raise ValueError(f"states must have shape (N, {STATE_DIM})")
        if self.weights.shape != (self.states.shape[0],):
            raise ValueError("one weight per particle required")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, X:Y + 1]

    @property
    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))

    def copy(self) -> "ParticleBelief":
        return replace(self, states=self.states.copy(), weights=self.weights.copy())

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": JSON_FORMAT,
                "columns": list(COLUMNS),
                "particles": self.states.tolist(),
                "weights": self.weights.tolist(),
                "existence": self.existence,
                "altitude": self.altitude,
                "model": {
                    "kind": self.model.kind,
                    "process_noise": list(self.model.process_noise),
                    "imm_transition": self.model.imm_transition.tolist(),
                    "dt": self.model.dt,
                },
            }
        )

    @classmethod
    def from_json(cls, text: str, params: FilterParams | None = None) -> "ParticleBelief":
        doc = json.loads(text)
        if doc.get("format") != JSON_FORMAT:
            raise ValueError(f"unsupported belief format {doc.get('format')!r}")
        m = doc["model"]
        model = MotionModel(
            kind=m["kind"],
            process_noise=tuple(m["process_noise"]),
            imm_transition=np.array(m["imm_transition"]),
            dt=m["dt"],
        )
        return cls(
            states=np.array(doc["particles"], dtype=float).reshape(-1, STATE_DIM),
            weights=np.array(doc["weights"], dtype=float),
            existence=doc["existence"],
            model=model,
            altitude=doc["altitude"],
            params=params or FilterParams(),
        )


def logsumexp(a: np.ndarray) -> float:
    m = a.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.exp(a - m).sum()))


def uniform_belief(
    n: int,
    arena: float,
    model: MotionModel,
    rng: np.random.Generator,
    speed_interval: tuple[float, float] = (0.0, 0.0),
    turn_rate_interval: tuple[float, float] = (0.0, 0.0),
    existence: float = 0.5,
    origin: tuple[float, float] = (0.0, 0.0),
    params: FilterParams | None = None,
) -> ParticleBelief:
    """Uninformed prior: positions uniform over the square arena.

    Velocities (CV kinds) get a uniform heading and a speed from
    ``speed_interval``; CV-IFT particles start straight with a turn rate (rad/s)
    drawn from ``turn_rate_interval``.
    """
    states = np.zeros((n, STATE_DIM))
    states[:, X] = origin[0] + arena * rng.random(n)
    states[:, Y] = origin[1] + arena * rng.random(n)
    if model.kind != "RW":
        heading = 2 * math.pi * rng.random(n)
        speed = rng.uniform(*speed_interval, size=n)
        states[:, VX] = speed * np.cos(heading)
        states[:, VY] = speed * np.sin(heading)
    if model.kind == "CV-IFT":
        states[:, OMEGA] = rng.uniform(*turn_rate_interval, size=n)
    return ParticleBelief(
        states=states,
        weights=np.full(n, 1.0 / n),
        existence=existence,
        model=model,
        params=params or FilterParams(),
    )


def predict(belief: ParticleBelief, dt: float, rng: np.random.Generator) -> ParticleBelief:
    if not dt > 0:
        raise ValueError("dt must be positive")
    model = belief.model if belief.model.dt == dt else replace(belief.model, dt=dt)
    p = belief.params
    q = belief.existence
    return replace(
        belief,
        states=propagate_states(belief.states, model, rng),
        weights=belief.weights.copy(),
        existence=p.p_birth * (1.0 - q) + p.p_survival * q,
    )


def systematic_indices(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(weights)
    cum /= cum[-1]
    u = (rng.random() + np.arange(n)) / n
    return np.minimum(np.searchsorted(cum, u, side="right"), len(weights) - 1)


def _roughen(states: np.ndarray, scale: float, rng: np.random.Generator) -> None:
    spread = np.ptp(states[:, X:VY + 1], axis=0) * scale
    if np.any(spread > 0):
        states[:, X:VY + 1] += spread * rng.standard_normal((states.shape[0], 4))


def resample(belief: ParticleBelief, rng: np.random.Generator, n: int | None = None) -> ParticleBelief:
    n = len(belief) if n is None else n
    idx = systematic_indices(belief.weights, n, rng)
    states = belief.states[idx]
    if belief.params.jitter:
        _roughen(states, belief.params.jitter_scale, rng)
    return replace(belief, states=states, weights=np.full(n, 1.0 / n))


def update_with_loglik(
    belief: ParticleBelief,
    loglik: np.ndarray | None,
    rng: np.random.Generator,
) -> ParticleBelief:
    """Bernoulli update from per-particle measurement log-likelihoods.

    ``loglik=None`` is the missed-detection case. Resamples when the effective
    sample size falls below ``params.resample_fraction`` of the particle count.
    """
    p = belief.params
    q = belief.existence
    if loglik is None:
        weights = belief.weights.copy()
        existence = q * (1.0 - p.p_detect) / (1.0 - q * p.p_detect)
    else:
        with np.errstate(divide="ignore"):
            logw = np.log(belief.weights) + loglik
        log_norm = logsumexp(logw)
        if not np.isfinite(log_norm):
            raise DegenerateUpdateError("all posterior weights are zero")
        weights = np.exp(logw - log_norm)
        # Predicted-measurement likelihood ratio against clutter.
        a = p.p_detect * math.exp(log_norm - math.log(p.clutter_intensity))
        existence = q * (1.0 - p.p_detect + a) / (1.0 - q * p.p_detect + q * a)
    out = replace(belief, weights=weights, existence=min(max(existence, 0.0), 1.0))
    if out.ess < p.resample_fraction * len(out):
        out = resample(out, rng)
    return out


def measurement_loglik(belief: ParticleBelief, value: float, agent: AgentState, rssi: RssiModel) -> np.ndarray:
    mean = power_at(belief.positions, agent.position3, rssi, object_altitude=belief.altitude)
    return gaussian_logpdf(value, mean, rssi.noise_var)


def update(
    belief: ParticleBelief,
    z: Measurement | None,
    agent: AgentState,
    rssi: RssiModel,
    rng: np.random.Generator,
) -> ParticleBelief:
    loglik = None if z is None else measurement_loglik(belief, z.value, agent, rssi)
    return update_with_loglik(belief, loglik, rng)


def estimate(belief: ParticleBelief) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean position and weighted (biased) positional covariance."""
    w = belief.weights
    pos = belief.positions
    # Shifting to one particle first keeps identical clouds exactly at zero spread.
    ref = pos[0]
    mean = ref + w @ (pos - ref)
    d = pos - mean
    cov = (d * w[:, None]).T @ d
    return mean, 0.5 * (cov + cov.T)


def trace_position_cov(belief: ParticleBelief) -> float:
    return float(np.trace(estimate(belief)[1]))


def downsample(belief: ParticleBelief, n: int, rng: np.random.Generator) -> ParticleBelief:
    """Draw ``n`` equally weighted particles by systematic resampling (no jitter)."""
    if n <= 0:
        raise ValueError("n must be positive")
    if n > len(belief):
        raise ValueError("cannot downsample to more particles than the source holds")
    idx = systematic_indices(belief.weights, n, rng)
    return replace(belief, states=belief.states[idx], weights=np.full(n, 1.0 / n))
