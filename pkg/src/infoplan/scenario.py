"""Mission simulation: ground truth, the onboard filters and the planner loop.

Two protocols are supported. *Following* keeps one object in view for a
fixed duration and logs estimation error and Tr(Cov) each second.
*Localization* chases the closest unlocalized object until every object's
positional uncertainty drops under a threshold or the timeout expires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as streams
from .belief import (
    FilterParams,
    ParticleBelief,
    downsample,
    estimate,
    predict,
    uniform_belief,
    update,
)
from .errors import GenerationError
from .generators import MeasurementGenerator
from .models import (
    AGENT_ALTITUDE,
    X,
    Y,
    Action,
    AgentState,
    MotionModel,
    RssiModel,
    measure,
    propagate_agent,
    propagate_states,
)
from .planner import STAGES, PlannerConfig, plan

# Semi-major axis of the 95% ellipse of a 2-D Gaussian is this many sigmas.
CONF95_SCALE = 2.4477

CSV_SCHEMA = "infoplan.mission/1"
CSV_COLUMNS = (
    "t", "obj_id", "truth_x", "truth_y", "est_x", "est_y",
    "error", "trace_cov", "target_id", "action",
)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    mission: str = "follow"
    arena: float = 4000.0
    truth_kind: str = "CV"
    filter_kind: str = "CV"
    n_objects: int = 1
    speed_interval: tuple[float, float] = (5.0, 6.0)
    turn_rate_interval_deg: tuple[float, float] = (10.0, 15.0)
    duration: float = 600.0
    timeout: float = 1000.0
    localized_threshold: float = 50.0
    min_in_arena: float = 0.0
    # Side of the square (centred on the arena) trajectories must stay inside
    # for ``min_in_arena`` seconds; ``None`` means the arena itself.
    containment: float | None = None
    # (position_std, velocity_std) per step. Filter velocity noise has to stay
    # small: RSSI alone cannot pin a fast-diffusing belief under the
    # localization threshold.
    truth_noise: dict = field(default_factory=lambda: {"RW": (0.5, 0.0), "CV": (0.0, 0.02), "CV-IFT": (0.0, 0.02)})
    filter_noise: dict = field(default_factory=lambda: {"RW": (1.0, 0.0), "CV": (0.05, 0.03), "CV-IFT": (0.05, 0.03)})
    mismatch_inflation: float = 3.0
    filter_particles: int = 4000
    initial_existence: float = 0.5
    clutter_rate: float = 0.0
    rejection_budget: int = 10000
    agent_altitude: float = AGENT_ALTITUDE
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    rssi: RssiModel = field(default_factory=RssiModel)
    filter: FilterParams = field(default_factory=FilterParams)

    def __post_init__(self):
        if self.mission not in ("follow", "localize"):
            raise ValueError(f"unknown mission {self.mission!r}")
        if not self.arena > 0:
            raise ValueError("arena must be positive")
        if self.n_objects < 1:
            raise ValueError("need at least one object")
        if self.mission == "follow" and self.n_objects != 1:
            raise ValueError("the following mission tracks a single object")
        if self.truth_kind not in ("RW", "CV", "CV-IFT"):
            raise ValueError(f"unknown truth model {self.truth_kind!r}")
        if self.filter_kind not in ("RW", "CV", "CV-IFT", "CV-mismatch"):
            raise ValueError(f"unknown filter model {self.filter_kind!r}")
        if self.mission == "localize" and self.timeout < self.min_in_arena:
            raise ValueError("timeout must cover the in-arena requirement")

    @property
    def steps(self) -> int:
        return int(round(self.duration if self.mission == "follow" else self.timeout))

    @property
    def turn_rate_interval(self) -> tuple[float, float]:
        lo, hi = self.turn_rate_interval_deg
        return math.radians(lo), math.radians(hi)

    def truth_model(self) -> MotionModel:
        return MotionModel(self.truth_kind, tuple(self.truth_noise[self.truth_kind]))

    def filter_model(self) -> MotionModel:
        if self.filter_kind == "CV-mismatch":
            return MotionModel("CV", tuple(self.filter_noise["CV"])).inflated(self.mismatch_inflation)
        return MotionModel(self.filter_kind, tuple(self.filter_noise[self.filter_kind]))


def _follow(name, truth, filt, **kw):
    return ScenarioConfig(name=name, mission="follow", truth_kind=truth, filter_kind=filt, **kw)


def _localize(name, truth, filt, **kw):
    kw.setdefault("containment", None)
    return ScenarioConfig(
        name=name,
        mission="localize",
        arena=1000.0,
        truth_kind=truth,
        filter_kind=filt,
        n_objects=4,
        speed_interval=(2.5, 3.0),
        duration=1000.0,
        timeout=1000.0,
        min_in_arena=650.0,
        planner=PlannerConfig(lookahead=20.0),
        **kw,
    )


PRESETS: dict[str, ScenarioConfig] = {
    "follow-rw": _follow("follow-rw", "RW", "RW"),
    "follow-cv": _follow("follow-cv", "CV", "CV"),
    "follow-cvift": _follow("follow-cvift", "CV-IFT", "CV-IFT"),
    "follow-cvift-mm": _follow("follow-cvift-mm", "CV-IFT", "CV-mismatch"),
    "localize-rw": _localize("localize-rw", "RW", "RW"),
    # Straight motion at >= 2.5 m/s cannot stay inside a 1 km square for
    # 650 s, so CV containment is checked against a wider square.
    "localize-cv": _localize("localize-cv", "CV", "CV", containment=4000.0),
    "localize-cvift": _localize("localize-cvift", "CV-IFT", "CV-IFT"),
    "localize-cvift-mm": _localize("localize-cvift-mm", "CV-IFT", "CV-mismatch"),
}
for _name in ("follow-rw", "follow-cv", "follow-cvift", "follow-cvift-mm"):
    PRESETS[_name + "-desk"] = replace(PRESETS[_name], name=_name + "-desk", arena=1000.0, duration=300.0)


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


def generate_trajectory(
    kind: str,
    arena: float,
    steps: int,
    rng: np.random.Generator,
    speed_interval: tuple[float, float] = (5.0, 6.0),
    turn_rate_interval: tuple[float, float] = (math.radians(10), math.radians(15)),
    noise: tuple[float, float] = (0.0, 0.0),
    min_in_arena: float = 0.0,
    containment: float | None = None,
    budget: int = 10000,
) -> np.ndarray:
    """Sample a ground-truth state sequence of ``steps + 1`` rows at 1 s spacing.

    Turn rates are in rad/s. When ``min_in_arena`` is positive the whole
    trajectory is redrawn until the object stays inside the containment square
    for at least that long.
    """
    model = MotionModel(kind, tuple(noise))
    side = arena if containment is None else containment
    lo = 0.5 * (arena - side)
    hold = int(math.ceil(min_in_arena))
    for _ in range(budget):
        state = np.zeros((1, 6))
        state[0, X:Y + 1] = arena * rng.random(2)
        if kind != "RW":
            heading = 2 * math.pi * rng.random()
            speed = rng.uniform(*speed_interval)
            state[0, 2:4] = speed * math.cos(heading), speed * math.sin(heading)
        if kind == "CV-IFT":
            state[0, 4] = rng.uniform(*turn_rate_interval)
        traj = np.empty((steps + 1, 6))
        traj[0] = state[0]
        for k in range(1, steps + 1):
            state = propagate_states(state, model, rng)
            traj[k] = state[0]
        if hold <= 0:
            return traj
        window = traj[: min(hold, steps) + 1, X:Y + 1]
        if np.all((window >= lo) & (window <= lo + side)):
            return traj
    raise GenerationError(f"no {kind} trajectory stayed in the arena after {budget} attempts")


@dataclass
class MissionRecord:
    scenario: str
    generator: str
    start_seed: int
    rep_seed: int
    rows: list = field(default_factory=list)
    localization_times: dict = field(default_factory=dict)
    localization_errors: dict = field(default_factory=dict)
    success: bool = False
    completion_time: float | None = None
    stage_timings: list = field(default_factory=list)
    decision_ns: list = field(default_factory=list)
    rollouts_per_decision: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [f"# schema: {CSV_SCHEMA}", ",".join(CSV_COLUMNS)]
        for t, obj, tx, ty, ex, ey, err, tr, target, action in self.rows:
            lines.append(
                f"{t:d},{obj:d},{tx:.6f},{ty:.6f},{ex:.6f},{ey:.6f},{err:.6f},{tr:.6f},{target:d},{action:d}"
            )
        return "\n".join(lines) + "\n"

    def timing_medians(self) -> dict:
        if not self.stage_timings:
            return {}
        return {s: float(np.median([t[s] for t in self.stage_timings])) for s in STAGES}


def is_localized(belief: ParticleBelief, threshold: float) -> bool:
    """95%-ellipse semi-major axis of the positional covariance within ``threshold``."""
    _, cov = estimate(belief)
    lam = max(float(np.linalg.eigvalsh(cov)[-1]), 0.0)
    return CONF95_SCALE * math.sqrt(lam) <= threshold


def clutter_measurements(rate: float, value_range: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """Poisson number of spurious RSSI values, uniform over ``value_range``."""
    n = rng.poisson(rate) if rate > 0 else 0
    return rng.uniform(*value_range, size=n)


def _initial_beliefs(config: ScenarioConfig, rng: np.random.Generator) -> list[ParticleBelief]:
    model = config.filter_model()
    return [
        uniform_belief(
            config.filter_particles,
            config.arena,
            model,
            rng,
            speed_interval=config.speed_interval,
            turn_rate_interval=config.turn_rate_interval,
            existence=config.initial_existence,
            params=config.filter,
        )
        for _ in range(config.n_objects)
    ]


def truth_trajectories(config: ScenarioConfig, start_seed: int) -> list[np.ndarray]:
    world = streams.stream("world", start_seed)
    return [
        generate_trajectory(
            config.truth_kind,
            config.arena,
            config.steps,
            world,
            speed_interval=config.speed_interval,
            turn_rate_interval=config.turn_rate_interval,
            noise=config.truth_noise[config.truth_kind],
            min_in_arena=config.min_in_arena,
            containment=config.containment,
            budget=config.rejection_budget,
        )
        for _ in range(config.n_objects)
    ]


def run_mission(
    config: ScenarioConfig,
    generator: MeasurementGenerator,
    start_seed: int = 0,
    rep_seed: int = 0,
    trajectories: list[np.ndarray] | None = None,
    beliefs: list[ParticleBelief] | None = None,
    agent: AgentState | None = None,
    on_plan=None,
) -> MissionRecord:
    """Simulate one mission at 1 Hz.

    The start seed fixes the ground truth; the repetition seed drives sensor
    noise, the filters and the planner through separate named streams.
    ``on_plan(step, planning_belief, agent)`` is called before every decision.
    """
    sensor = streams.stream("sensor", start_seed, rep_seed)
    filter_rng = streams.stream("filter", start_seed, rep_seed)
    planner_rng = streams.stream("planner", start_seed, rep_seed)
    gen_rng = streams.stream("generator", start_seed, rep_seed)

    if trajectories is None:
        trajectories = truth_trajectories(config, start_seed)
    if beliefs is None:
        beliefs = _initial_beliefs(config, filter_rng)
    if agent is None:
        centre = np.array([config.arena / 2, config.arena / 2])
        agent = AgentState(position=centre, altitude=config.agent_altitude)

    record = MissionRecord(config.name, generator.label, int(start_seed), int(rep_seed))
    localize = config.mission == "localize"
    threshold = config.localized_threshold
    pcfg = config.planner
    period = max(int(round(pcfg.replan_period)), 1)
    n = len(beliefs)
    dt = 1.0

    if localize:
        for i, b in enumerate(beliefs):
            if is_localized(b, threshold):
                record.localization_times[i] = 0.0
                mean, _ = estimate(b)
                record.localization_errors[i] = float(np.hypot(*(mean - trajectories[i][0, X:Y + 1])))
        if len(record.localization_times) == n:
            record.success = True
            record.completion_time = 0.0
            return record

    action = Action.EAST
    target = 0
    replan = True
    for step in range(1, config.steps + 1):
        if replan or (step - 1) % period == 0:
            if localize:
                open_ids = [i for i in range(n) if i not in record.localization_times]
                means = [estimate(beliefs[i])[0] for i in open_ids]
                dists = [float(np.hypot(*(m - agent.position))) for m in means]
                target = open_ids[int(np.argmin(dists))]
            planning = downsample(beliefs[target], pcfg.planning_particles, planner_rng)
            if on_plan is not None:
                on_plan(step, planning, agent)
            decision = plan(planning, agent, generator, config.rssi, pcfg, planner_rng, gen_rng)
            action = decision.action
            record.stage_timings.extend(t.timings for t in decision.traces)
            record.decision_ns.append(decision.wall_ns)
            record.rollouts_per_decision.append(decision.n_rollouts)
            replan = False

        agent = propagate_agent(agent, action, dt)
        for i in range(n):
            beliefs[i] = predict(beliefs[i], dt, filter_rng)
            truth = trajectories[i][step]
            z = None
            if sensor.random() < config.filter.p_detect:
                pos3 = (truth[X], truth[Y], beliefs[i].altitude)
                z = measure(pos3, agent.position3, config.rssi, sensor, source_id=i, timestamp=float(step))
            # Association is known from the channel, so clutter never reaches a filter.
            clutter_measurements(config.clutter_rate, (-120.0, 0.0), sensor)
            beliefs[i] = update(beliefs[i], z, agent, config.rssi, filter_rng)

        for i in range(n):
            mean, cov = estimate(beliefs[i])
            truth = trajectories[i][step]
            err = float(np.hypot(mean[0] - truth[X], mean[1] - truth[Y]))
            record.rows.append(
                (step, i, truth[X], truth[Y], mean[0], mean[1], err, float(np.trace(cov)), target, int(action))
            )
            if localize and i not in record.localization_times and is_localized(beliefs[i], threshold):
                record.localization_times[i] = float(step)
                record.localization_errors[i] = err
                if i == target:
                    replan = True

        if localize and len(record.localization_times) == n:
            record.success = True
            record.completion_time = float(step)
            break

    if not localize:
        record.success = True
        record.completion_time = float(config.steps)
    return record


def run_following_mission(config, generator, start_seed=0, rep_seed=0, **kw) -> MissionRecord:
    if config.mission != "follow":
        raise ValueError(f"{config.name} is not a following scenario")
    return run_mission(config, generator, start_seed, rep_seed, **kw)


def run_localization_mission(config, generator, start_seed=0, rep_seed=0, **kw) -> MissionRecord:
    if config.mission != "localize":
        raise ValueError(f"{config.name} is not a localization scenario")
    return run_mission(config, generator, start_seed, rep_seed, **kw)

