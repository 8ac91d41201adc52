"""Receding-horizon action selection by simulated rollouts.

Each rollout step predicts the belief and moves the agent, generates a
measurement with the configured generator, updates the belief with it and
scores the update by its information gain. The planner picks the first
heading whose rollouts score the highest average discounted reward.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .belief import ParticleBelief, measurement_loglik, predict, update_with_loglik
from .errors import DegenerateUpdateError
from .generators import MeasurementGenerator
from .models import Action, AgentState, RssiModel, propagate_agent
from .reward import RewardConfig, discounted_sum, step_reward
from .rng import child_seeds, from_seed

log = logging.getLogger(__name__)

STAGES = ("predict", "measure", "update", "reward")
ACTIONS = tuple(Action)


@dataclass(frozen=True)
class PlannerConfig:
    replan_period: float = 5.0
    lookahead: float = 10.0
    rollout_dt: float = 1.0
    mc_repeats: int = 8
    rollout_policy: str = "constant"
    planning_particles: int = 1000
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if self.lookahead < self.replan_period:
            raise ValueError("lookahead must be at least the replan period")
        steps = self.lookahead / self.rollout_dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError("rollout_dt must divide lookahead")
        if self.mc_repeats < 1:
            raise ValueError("mc_repeats must be >= 1")
        self.enumerate_depth  # validates the policy string

    @property
    def horizon(self) -> int:
        return int(round(self.lookahead / self.rollout_dt))

    @property
    def enumerate_depth(self) -> int:
        """Depth of full sequence enumeration; 1 means constant-action rollouts."""
        if self.rollout_policy == "constant":
            return 1
        kind, _, depth = self.rollout_policy.partition(":")
        if kind != "enumerate" or not depth.isdigit() or int(depth) < 1:
            raise ValueError(f"bad rollout policy {self.rollout_policy!r}")
        return min(int(depth), self.horizon)


@dataclass
class RolloutTrace:
    actions: tuple
    rewards: list
    timings: dict
    total_ns: int = 0
    value: float = 0.0
    degenerate: bool = False


@dataclass
class Decision:
    action: Action
    values: np.ndarray
    traces: list
    n_rollouts: int
    wall_ns: int


def rollout(
    belief: ParticleBelief,
    agent: AgentState,
    actions,
    generator: MeasurementGenerator,
    rssi: RssiModel,
    config: PlannerConfig,
    rng: np.random.Generator,
    gen_rng: np.random.Generator | None = None,
) -> RolloutTrace:
    """Play out one action sequence; ``rng`` drives belief noise, ``gen_rng`` the generator."""
    gen_rng = rng if gen_rng is None else gen_rng
    clock = time.perf_counter_ns
    timings = dict.fromkeys(STAGES, 0)
    rewards = []
    degenerate = False
    dt = config.rollout_dt
    start = clock()
    for action in actions:
        t0 = clock()
        belief = predict(belief, dt, rng)
        agent = propagate_agent(agent, action, dt)
        t1 = clock()
        z = generator(belief, agent, rssi, gen_rng)
        t2 = clock()
        prior_weights = belief.weights
        loglik = measurement_loglik(belief, z.value, agent, rssi)
        try:
            belief = update_with_loglik(belief, loglik, rng)
        except DegenerateUpdateError:
            log.warning("degenerate update in rollout; keeping %d rewards", len(rewards))
            degenerate = True
            break
        t3 = clock()
        rewards.append(step_reward(prior_weights, loglik, action, config.reward, prior=belief))
        t4 = clock()
        timings["predict"] += t1 - t0
        timings["measure"] += t2 - t1
        timings["update"] += t3 - t2
        timings["reward"] += t4 - t3
    total = clock() - start
    value = discounted_sum(rewards, config.reward.discount) if rewards else 0.0
    return RolloutTrace(
        actions=tuple(Action(a) for a in actions),
        rewards=rewards,
        timings=timings,
        total_ns=total,
        value=value,
        degenerate=degenerate,
    )


def action_sequences(first: Action, config: PlannerConfig) -> list[tuple]:
    depth = config.enumerate_depth
    horizon = config.horizon
    seqs = []
    for tail in itertools.product(ACTIONS, repeat=depth - 1):
        head = (first, *tail)
        seqs.append(head + (head[-1],) * (horizon - depth))
    return seqs


def n_repeats(generator: MeasurementGenerator, config: PlannerConfig) -> int:
    return config.mc_repeats if generator.kind == "mc" else 1


def plan(
    belief: ParticleBelief,
    agent: AgentState,
    generator: MeasurementGenerator,
    rssi: RssiModel,
    config: PlannerConfig,
    rng: np.random.Generator,
    gen_rng: np.random.Generator | None = None,
    executor=None,
) -> Decision:
    """Score every first heading and return the best one with all traces.

    Every first heading is evaluated with the same per-rollout seeds (common
    random numbers), so headings differ only by the agent's path. Ties go to
    the lowest heading index.
    """
    start = time.perf_counter_ns()
    repeats = n_repeats(generator, config)
    n_cont = len(ACTIONS) ** (config.enumerate_depth - 1)
    gen_rng = rng if gen_rng is None else gen_rng
    seeds = np.stack(
        [
            child_seeds(rng, repeats * n_cont).reshape(repeats, n_cont),
            child_seeds(gen_rng, repeats * n_cont).reshape(repeats, n_cont),
        ],
        axis=-1,
    )

    tasks = []
    for a in ACTIONS:
        for k, seq in enumerate(action_sequences(a, config)):
            for j in range(repeats):
                tasks.append((a, seq, seeds[j, k]))

    def run(task):
        _, seq, (s_belief, s_gen) = task
        return rollout(
            belief, agent, seq, generator, rssi, config, from_seed(s_belief), from_seed(s_gen)
        )

    traces = list(executor.map(run, tasks)) if executor is not None else [run(t) for t in tasks]

    totals = np.zeros(len(ACTIONS))
    counts = np.zeros(len(ACTIONS))
    for (a, _, _), trace in zip(tasks, traces):
        totals[a] += trace.value
        counts[a] += 1
    values = totals / counts
    best = Action(int(np.argmax(values)))
    return Decision(
        action=best,
        values=values,
        traces=traces,
        n_rollouts=len(traces),
        wall_ns=time.perf_counter_ns() - start,
    )


def select_action(belief, agent, generator, rssi, config, rng, gen_rng=None, executor=None) -> Action:
    return plan(belief, agent, generator, rssi, config, rng, gen_rng, executor=executor).action


def stage_timing_report(traces) -> dict[str, float]:
    """Median nanoseconds per stage across rollout traces."""
    if not traces:
        raise ValueError("need at least one trace")
    return {s: float(np.median([t.timings[s] for t in traces])) for s in STAGES}
