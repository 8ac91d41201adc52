"""Seeded batch execution, result aggregation and generator comparison.

A batch runs one mission per ``(start_seed, rep_seed)`` pair. The start seed
fixes ground truth, the repetition seed everything stochastic on board, so a
manifest fully determines its output files.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ScenarioMismatchError
from .generators import DEFAULT_MEXGEN_SAMPLES, MeasurementGenerator
from .planner import PlannerConfig
from .reward import RewardConfig
from .scenario import CSV_SCHEMA, MissionRecord, ScenarioConfig, preset, run_mission

SUMMARY_SCHEMA = "infoplan.summary/1"
GENERATOR_ORDER = ("pim", "mc", "mexgen")

_TUPLE_FIELDS = {"speed_interval", "turn_rate_interval_deg"}


class ConfigError(ValueError):
    """Config file is unreadable or names unknown fields."""


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return data


def _known(cls, values: dict, where: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {where} field(s): {', '.join(sorted(unknown))}")
    return values


def build_scenario(data: dict) -> ScenarioConfig:
    """Scenario from a config mapping: a preset name plus field overrides."""
    data = dict(data)
    name = data.pop("preset", None) or data.pop("scenario", None)
    if name is None:
        raise ConfigError("config needs a 'preset'")
    overrides = dict(data.pop("scenario_overrides", {}) or {})
    planner = dict(data.pop("planner", {}) or {})
    reward = dict(planner.pop("reward", {}) or {})
    for key in ("generator", "seeds", "output", "workers", "mexgen_samples", "starts", "reps"):
        data.pop(key, None)
    if data:
        raise ConfigError(f"unknown top-level field(s): {', '.join(sorted(data))}")
    try:
        base = preset(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    _known(ScenarioConfig, overrides, "scenario")
    for key in _TUPLE_FIELDS & set(overrides):
        overrides[key] = tuple(overrides[key])
    for key in ("truth_noise", "filter_noise"):
        if key in overrides:
            merged = dict(getattr(base, key))
            merged.update({k: tuple(v) for k, v in overrides[key].items()})
            overrides[key] = merged
    if planner or reward:
        _known(PlannerConfig, planner, "planner")
        _known(RewardConfig, reward, "reward")
        pcfg = replace(base.planner, **planner)
        if reward:
            pcfg = replace(pcfg, reward=replace(pcfg.reward, **reward))
        overrides["planner"] = pcfg
    try:
        return replace(base, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario settings: {exc}") from exc


@dataclass
class RunManifest:
    config_path: str | None
    generator: MeasurementGenerator
    seeds: list = field(default_factory=list)
    output_dir: str = "runs"
    workers: int = 1
    scenario: ScenarioConfig | None = None

    def __post_init__(self):
        self.seeds = [(int(s), int(r)) for s, r in self.seeds]
        if not self.seeds:
            raise ValueError("manifest needs at least one seed pair")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("manifest seed pairs must be unique")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.scenario is None:
            if self.config_path is None:
                raise ValueError("manifest needs a config path or a scenario")
            self.scenario = build_scenario(load_config(self.config_path))

    @classmethod
    def from_config(cls, path, **overrides) -> "RunManifest":
        """Manifest from a YAML file; keyword overrides win over file fields.

        Recognised file keys besides the scenario ones: ``generator``,
        ``mexgen_samples``, ``starts``, ``reps``, ``output``, ``workers``.
        """
        data = load_config(path)
        kind = overrides.pop("generator", None) or data.get("generator", "mexgen")
        m = overrides.pop("mexgen_samples", None) or data.get("mexgen_samples", DEFAULT_MEXGEN_SAMPLES)
        starts = overrides.pop("starts", None) or data.get("starts", [0])
        reps = overrides.pop("reps", None) or data.get("reps", [0])
        policy = overrides.pop("policy", None)
        if policy is not None:
            data.setdefault("planner", {})
            data["planner"] = {**(data["planner"] or {}), "rollout_policy": policy}
        scenario = build_scenario(data)
        return cls(
            config_path=str(path),
            generator=MeasurementGenerator(kind, int(m)),
            seeds=seed_grid(starts, reps),
            output_dir=overrides.pop("output_dir", None) or data.get("output", "runs"),
            workers=int(overrides.pop("workers", None) or data.get("workers", 1)),
            scenario=scenario,
        )


def seed_grid(starts, reps) -> list[tuple[int, int]]:
    return [(int(s), int(r)) for s in starts for r in reps]


def mission_filename(start: int, rep: int) -> str:
    return f"mission_s{start}_r{rep}.csv"


def _run_one(args) -> MissionRecord:
    scenario, generator, start, rep = args
    return run_mission(scenario, generator, start, rep)


def mission_summary(rec: MissionRecord) -> dict:
    return {
        "start_seed": rec.start_seed,
        "rep_seed": rec.rep_seed,
        "success": rec.success,
        "completion_time": rec.completion_time,
        "localization_times": {str(k): v for k, v in sorted(rec.localization_times.items())},
        "localization_errors": {str(k): v for k, v in sorted(rec.localization_errors.items())},
        "final_trace_cov": final_trace_cov(rec),
        "decisions": len(rec.decision_ns),
        "rollouts_per_decision": sorted(set(rec.rollouts_per_decision)),
    }


def final_trace_cov(rec: MissionRecord) -> float | None:
    """Mean trace_cov over objects at the last logged step."""
    if not rec.rows:
        return None
    last = rec.rows[-1][0]
    return float(np.mean([r[7] for r in rec.rows if r[0] == last]))


def _mean_std(values) -> dict:
    vals = [float(v) for v in values]
    if not vals:
        return {"mean": None, "std": None, "n": 0}
    arr = np.asarray(vals)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "n": len(vals)}


def summarize(records, scenario: ScenarioConfig, generator: MeasurementGenerator) -> dict:
    """Aggregate missions into success rate and error/time mean +- std.

    Error pools every declared localization (or the final-step error for
    following missions); time uses successful missions only.
    """
    records = list(records)
    errors = []
    for rec in records:
        if rec.localization_errors:
            errors.extend(rec.localization_errors.values())
        elif scenario.mission == "follow" and rec.rows:
            last = rec.rows[-1][0]
            errors.extend(r[6] for r in rec.rows if r[0] == last)
    times = [r.completion_time for r in records if r.success and r.completion_time is not None]
    stage = {}
    timed = [r.timing_medians() for r in records if r.stage_timings]
    if timed:
        stage = {k: float(np.median([t[k] for t in timed])) for k in timed[0]}
    decision = [ns for r in records for ns in r.decision_ns]
    return {
        "schema": SUMMARY_SCHEMA,
        "csv_schema": CSV_SCHEMA,
        "scenario": scenario.name,
        "mission": scenario.mission,
        "generator": generator.kind,
        "label": generator.label,
        "mexgen_samples": generator.mexgen_samples if generator.kind == "mexgen" else None,
        "missions": len(records),
        "success_rate": float(np.mean([r.success for r in records])) if records else math.nan,
        "error": _mean_std(errors),
        "time": _mean_std(times),
        "final_trace_cov_median": (
            float(np.median([final_trace_cov(r) for r in records if r.rows])) if records else None
        ),
        "stage_timing_median_ns": stage,
        "decision_wall_median_ns": float(np.median(decision)) if decision else None,
        "per_mission": [mission_summary(r) for r in records],
    }


def run_batch(manifest: RunManifest, write: bool = True) -> tuple[dict, list[MissionRecord]]:
    """Run every seed pair; write per-mission CSVs and ``summary.json``.

    With ``workers > 1`` missions run in a process pool. Each mission is
    sequential and seeded on its own, and results are collected in manifest
    order, so output does not depend on the worker count.
    """
    jobs = [(manifest.scenario, manifest.generator, s, r) for s, r in manifest.seeds]
    if manifest.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    summary = summarize(records, manifest.scenario, manifest.generator)
    if write:
        out = Path(manifest.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            for rec in records:
                (out / mission_filename(rec.start_seed, rec.rep_seed)).write_text(rec.to_csv())
            (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write results to {out}: {exc}") from exc
    return summary, records


def compare_generators(summaries) -> list[dict]:
    """Side-by-side success / error / time rows, one per summary, input order kept."""
    summaries = list(summaries)
    if not summaries:
        raise ValueError("nothing to compare")
    names = {s["scenario"] for s in summaries}
    if len(names) > 1:
        raise ScenarioMismatchError(f"summaries come from different scenarios: {sorted(names)}")
    return [
        {
            "generator": s["label"],
            "success": s["success_rate"],
            "error_mean": s["error"]["mean"],
            "error_std": s["error"]["std"],
            "time_mean": s["time"]["mean"],
            "time_std": s["time"]["std"],
        }
        for s in summaries
    ]


def format_comparison(rows) -> str:
    def pm(m, s):
        return "n/a" if m is None else f"{m:.1f} +- {s:.1f}"

    lines = [f"{'Method':<8} {'Success':>7}  {'Error (m)':>16}  {'Time (s)':>18}"]
    for r in rows:
        lines.append(
            f"{r['generator']:<8} {r['success']:>7.2f}  {pm(r['error_mean'], r['error_std']):>16}"
            f"  {pm(r['time_mean'], r['time_std']):>18}"
        )
    return "\n".join(lines)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
