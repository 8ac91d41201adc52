"""Command line entry point: ``infoplan run|compare|lemma-lab|timing``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import rng as streams
from .batch import (
    GENERATOR_ORDER,
    ConfigError,
    RunManifest,
    build_scenario,
    compare_generators,
    format_comparison,
    run_batch,
    seed_grid,
)
from .errors import ScenarioMismatchError
from .generators import DEFAULT_MEXGEN_SAMPLES, MeasurementGenerator
from .lemma import (
    FUNCTIONS,
    brute_force_measurement_density,
    random_case,
    verify_error_bound,
)
from .scenario import PRESETS

log = logging.getLogger("infoplan")


def _int_list(text: str) -> list[int]:
    """``"0,1,2"`` or ``"0-4"`` (inclusive) to a list of ints."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _manifest(args, generator: str | None = None) -> RunManifest:
    overrides = {
        "generator": generator or args.generator,
        "mexgen_samples": args.mexgen_samples,
        "starts": args.starts,
        "reps": args.reps,
        "policy": args.policy,
        "workers": args.workers,
        "output_dir": args.output,
    }
    if args.config:
        return RunManifest.from_config(args.config, **overrides)
    data = {"preset": args.preset}
    if args.policy:
        data["planner"] = {"rollout_policy": args.policy}
    return RunManifest(
        config_path=None,
        generator=MeasurementGenerator(overrides["generator"] or "mexgen", args.mexgen_samples or DEFAULT_MEXGEN_SAMPLES),
        seeds=seed_grid(args.starts or [0], args.reps or [0]),
        output_dir=args.output or "runs",
        workers=args.workers or 1,
        scenario=build_scenario(data),
    )


def cmd_run(args) -> int:
    manifest = _manifest(args)
    summary, _ = run_batch(manifest)
    print(
        f"{summary['scenario']} {summary['label']}: {summary['missions']} missions, "
        f"success {summary['success_rate']:.2f} -> {manifest.output_dir}/summary.json"
    )
    return 0


def cmd_compare(args) -> int:
    if args.summaries:
        summaries = [json.loads(Path(p).read_text()) for p in args.summaries]
    else:
        summaries = []
        base = args.output or "runs"
        for kind in args.generators:
            args.output = str(Path(base) / kind)
            summary, _ = run_batch(_manifest(args, generator=kind))
            summaries.append(summary)
    rows = compare_generators(summaries)
    print(format_comparison(rows))
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2) + "\n")
    return 0


def cmd_lemma_lab(args) -> int:
    rng = streams.stream("lemma", args.seed)
    violations = 0
    for k in range(args.cases):
        case = random_case(rng, args.function)
        density = brute_force_measurement_density(case)
        reports = [verify_error_bound(case, m, args.trials, rng, density=density) for m in args.m]
        bad = [r for r in reports if not r.ok]
        violations += len(bad)
        record = {
            "case": k,
            "function": case.function,
            "atoms": int(len(case.weights)),
            "noise_var": case.noise_var,
            "sigma2": reports[0].sigma2,
            "mse_pim": reports[0].mse_pim,
            "results": [
                {
                    "m": r.m,
                    "mexgen_mse": r.mexgen_mse,
                    "se": r.mexgen_se,
                    "bound_holds": r.bound_holds,
                    "expectation_matches": r.expectation_matches,
                }
                for r in reports
            ],
        }
        if bad:
            record["violation_case"] = case.to_dict()
        print(json.dumps(record))
    log.info("%d case(s), %d violation(s)", args.cases, violations)
    return 1 if violations else 0


def cmd_timing(args) -> int:
    from .timing import time_decisions

    report = time_decisions(
        kinds=args.generators,
        scenario=args.preset,
        seed=args.seed,
        duration=args.duration,
        mexgen_samples=args.mexgen_samples or DEFAULT_MEXGEN_SAMPLES,
    )
    print(json.dumps(report, indent=2))
    return 0


def _add_batch_options(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML scenario config")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    p.add_argument("--mexgen-samples", type=int, default=None, help="M for the MexGen generator")
    p.add_argument("--policy", default=None, help="rollout policy: constant or enumerate:D")
    p.add_argument("--starts", type=_int_list, default=None, help="start-state seeds, e.g. 0-9")
    p.add_argument("--reps", type=_int_list, default=None, help="repetition seeds, e.g. 0,1,2")
    p.add_argument("--workers", type=int, default=None, help="missions run in parallel")
    p.add_argument("--output", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infoplan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded batch of missions")
    _add_batch_options(run)
    run.add_argument("--generator", choices=GENERATOR_ORDER, default=None)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="success / error / time per generator")
    cmp_.add_argument("--summaries", nargs="+", help="existing summary.json files to tabulate")
    _add_batch_options_optional(cmp_)
    cmp_.add_argument("--generators", type=lambda s: s.split(","), default=list(GENERATOR_ORDER))
    cmp_.add_argument("--json", help="also write the table as JSON here")
    cmp_.set_defaults(func=cmd_compare, generator=None)

    lab = sub.add_parser("lemma-lab", help="check the PIM vs MexGen error bound on random cases")
    lab.add_argument("--cases", type=int, default=100)
    lab.add_argument("--m", type=_int_list, default=[8, 64, 512])
    lab.add_argument("--trials", type=int, default=10_000)
    lab.add_argument("--function", choices=FUNCTIONS, default=None)
    lab.add_argument("--seed", type=int, default=0)
    lab.set_defaults(func=cmd_lemma_lab)

    tim = sub.add_parser("timing", help="per-stage planning run time on mission beliefs")
    tim.add_argument("--preset", choices=sorted(p for p in PRESETS if p.startswith("localize")), default="localize-rw")
    tim.add_argument("--generators", type=lambda s: s.split(","), default=list(GENERATOR_ORDER))
    tim.add_argument("--mexgen-samples", type=int, default=None)
    tim.add_argument("--duration", type=int, default=60, help="mission seconds to capture beliefs from")
    tim.add_argument("--seed", type=int, default=0)
    tim.set_defaults(func=cmd_timing)
    return parser


def _add_batch_options_optional(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML scenario config")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--mexgen-samples", type=int, default=None)
    p.add_argument("--policy", default=None)
    p.add_argument("--starts", type=_int_list, default=None)
    p.add_argument("--reps", type=_int_list, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", default=None)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "compare" and not args.summaries and not (args.config or args.preset):
        print("error: compare needs --summaries or --config/--preset", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, ScenarioMismatchError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
