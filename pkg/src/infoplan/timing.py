"""Per-decision run-time measurements for the three generators."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import rng as streams
from .generators import MeasurementGenerator
from .planner import PlannerConfig, plan, stage_timing_report
from .scenario import preset, run_mission


def mission_planning_beliefs(
    scenario: str = "localize-rw",
    seed: int = 0,
    duration: int = 60,
    generator: str = "pim",
) -> list:
    """Planning beliefs and agent states captured from the start of a mission.

    These are the downsampled beliefs the planner really sees: broad right
    after take-off, tighter once a target has been found.
    """
    cfg = preset(scenario)
    cfg = replace(cfg, timeout=float(duration), duration=float(duration), min_in_arena=min(cfg.min_in_arena, duration))
    captured = []
    run_mission(cfg, MeasurementGenerator(generator), seed, 0, on_plan=lambda _, b, a: captured.append((b, a)))
    return captured


def time_decisions(
    kinds=("pim", "mc", "mexgen"),
    scenario: str = "localize-rw",
    seed: int = 0,
    duration: int = 60,
    config: PlannerConfig | None = None,
    mexgen_samples: int = 512,
) -> dict:
    """Median stage times and decision wall time per generator.

    Every generator plans from the same captured beliefs with the same seeds.
    """
    cfg = preset(scenario)
    config = config or cfg.planner
    states = mission_planning_beliefs(scenario, seed, duration)
    out = {}
    for kind in kinds:
        gen = MeasurementGenerator(kind, mexgen_samples)
        rng = streams.stream("planner", seed, 0)
        gen_rng = streams.stream("generator", seed, 0)
        traces, walls, counts = [], [], []
        for belief, agent in states:
            d = plan(belief, agent, gen, cfg.rssi, config, rng, gen_rng)
            traces.extend(d.traces)
            walls.append(d.wall_ns)
            counts.append(d.n_rollouts)
        out[kind] = {
            "label": gen.label,
            "decisions": len(walls),
            "planning_particles": int(len(states[0][0])) if states else 0,
            "stage_median_ns": stage_timing_report(traces),
            "decision_wall_median_ns": float(np.median(walls)),
            "rollouts_per_decision": sorted(set(counts)),
        }
    return out
