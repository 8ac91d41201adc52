"""Future-measurement generators used inside planning rollouts.

Three strategies produce the measurement a rollout feeds back into its
predicted belief:

* ``pim``: noiseless measurement of the belief's mean position.
* ``mc``: one noisy measurement of one belief-sampled state; the planner
  averages rewards over repeated rollouts.
* ``mexgen``: the sample mean of ``M`` noisy measurements of belief-sampled
  states, so a single rollout per action suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .belief import ParticleBelief
from .models import AgentState, Measurement, RssiModel, power_at

KINDS = ("pim", "mc", "mexgen")
DEFAULT_MEXGEN_SAMPLES = 512


def _sample_positions(belief: ParticleBelief, size: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(belief.weights)
    u = rng.random(size)
    # Sorted keys make the lookup cache friendly; draw order carries no meaning.
    u.sort()
    u *= cum[-1]
    idx = cum.searchsorted(u, side="right")
    np.minimum(idx, len(cum) - 1, out=idx)
    return belief.states.take(idx, axis=0)[:, :2]


def generate_pim(belief: ParticleBelief, agent: AgentState, model: RssiModel) -> Measurement:
    mean = belief.weights @ belief.positions / belief.weights.sum()
    value = power_at(mean[None, :], agent.position3, model, object_altitude=belief.altitude)[0]
    return Measurement(value=float(value))


def generate_mc(
    belief: ParticleBelief, agent: AgentState, model: RssiModel, rng: np.random.Generator
) -> Measurement:
    pos = _sample_positions(belief, 1, rng)
    value = power_at(pos, agent.position3, model, object_altitude=belief.altitude)[0]
    if model.noise_var > 0:
        value += model.noise_std * rng.standard_normal()
    return Measurement(value=float(value))


def expected_measurement(samples) -> float:
    """Average of sampled measurements, taken in dB."""
    return float(np.mean(samples))


def sample_measurements(
    belief: ParticleBelief, agent: AgentState, model: RssiModel, m: int, rng: np.random.Generator
) -> np.ndarray:
    pos = _sample_positions(belief, m, rng)
    z = power_at(pos, agent.position3, model, object_altitude=belief.altitude)
    if model.noise_var > 0:
        z = z + model.noise_std * rng.standard_normal(m)
    return z


def generate_mexgen(
    belief: ParticleBelief,
    agent: AgentState,
    model: RssiModel,
    m: int,
    rng: np.random.Generator,
) -> Measurement:
    """Average of ``m`` noisy measurements of belief-sampled states.

    The mean of ``m`` iid N(0, R) noise terms is exactly N(0, R/m), so the
    noise is drawn once rather than per sample.
    """
    if m < 1:
        raise ValueError("MexGen needs at least one sample")
    pos = _sample_positions(belief, m, rng)
    value = power_at(pos, agent.position3, model, object_altitude=belief.altitude).sum() / m
    if model.noise_var > 0:
        value += math.sqrt(model.noise_var / m) * rng.standard_normal()
    return Measurement(value=float(value))


def predicted_measurement_moments(
    belief: ParticleBelief, agent: AgentState, model: RssiModel
) -> tuple[float, float]:
    """Exact mean and variance of the Gaussian-mixture predicted measurement."""
    h = power_at(belief.positions, agent.position3, model, object_altitude=belief.altitude)
    w = belief.weights / belief.weights.sum()
    mean = float(w @ h)
    var = float(w @ (h - mean) ** 2) + model.noise_var
    return mean, var


@dataclass(frozen=True)
class MeasurementGenerator:
    kind: str = "mexgen"
    mexgen_samples: int = DEFAULT_MEXGEN_SAMPLES

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator {self.kind!r}; expected one of {KINDS}")
        if self.mexgen_samples < 1:
            raise ValueError("mexgen_samples must be >= 1")

    @property
    def label(self) -> str:
        return {"pim": "PIM", "mc": "MC", "mexgen": "MexGen"}[self.kind]

    def __call__(
        self,
        belief: ParticleBelief,
        agent: AgentState,
        model: RssiModel,
        rng: np.random.Generator,
    ) -> Measurement:
        if self.kind == "pim":
            return generate_pim(belief, agent, model)
        if self.kind == "mc":
            return generate_mc(belief, agent, model, rng)
        return generate_mexgen(belief, agent, model, self.mexgen_samples, rng)
