"""Information-gain reward between particle beliefs on a shared support."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .belief import logsumexp
from .errors import DegenerateUpdateError

ACTION_COSTS: dict[str, Callable] = {
    "zero": lambda belief, action: 0.0,
}


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.1
    discount: float = 1.0
    action_cost: str = "zero"

    def __post_init__(self):
        if not self.alpha > 0 or self.alpha == 1:
            raise ValueError("alpha must be positive and different from 1")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if self.action_cost not in ACTION_COSTS:
            raise ValueError(f"unknown action cost {self.action_cost!r}")


def renyi_divergence_log(weights: np.ndarray, loglik: np.ndarray, alpha: float) -> float:
    """Renyi divergence of the reweighted belief from its prior, in nats.

    The posterior is ``w_i g_i / sum(w g)`` on the prior's support, which
    reduces the divergence to ``log(sum w g^a / (sum w g)^a) / (a - 1)``.
    """
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    top = loglik.max()
    if not np.isfinite(top):
        raise DegenerateUpdateError("all likelihoods are zero")
    # Centring and self-normalising make a flat likelihood give exactly 0.
    ll = loglik - top
    log_total = logsumexp(logw)
    log_first = logsumexp(logw + alpha * ll) - log_total
    log_mean = logsumexp(logw + ll) - log_total
    return float((log_first - alpha * log_mean) / (alpha - 1.0))


def renyi_divergence_particle(weights, likelihoods, alpha: float) -> float:
    g = np.asarray(likelihoods, dtype=float)
    if np.any(g < 0):
        raise ValueError("likelihoods must be non-negative")
    if not np.any(g > 0):
        raise DegenerateUpdateError("all likelihoods are zero")
    with np.errstate(divide="ignore"):
        return renyi_divergence_log(np.asarray(weights, dtype=float), np.log(g), alpha)


def step_reward(prior_weights, loglik, action, config: RewardConfig, prior=None) -> float:
    cost = ACTION_COSTS[config.action_cost](prior, action)
    return cost + renyi_divergence_log(np.asarray(prior_weights), np.asarray(loglik), config.alpha)


def discounted_sum(rewards, discount: float) -> float:
    r = np.asarray(rewards, dtype=float)
    if r.size < 1:
        raise ValueError("need at least one reward")
    return float(np.sum(r * discount ** np.arange(r.size)))


def register_action_cost(name: str, fn: Callable) -> None:
    """Add a named action-cost term ``fn(belief, action) -> nats``."""
    ACTION_COSTS[name] = fn


__all__ = [
    "RewardConfig",
    "discounted_sum",
    "register_action_cost",
    "renyi_divergence_log",
    "renyi_divergence_particle",
    "step_reward",
]
