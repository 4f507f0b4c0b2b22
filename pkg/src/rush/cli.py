"""Command-line entry point: ``rush {gen,run,compare,sweep,verify-theorem,report}``.

Outputs never depend on ``--jobs`` or on output paths, so neither is embedded
in the self-describing JSON summaries.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import csv
from dataclasses import asdict, replace
from typing import Any, Sequence

import numpy as np

from rush import benchgen, harness
from rush.core import true_best_arm
from rush.errors import RushError
from rush.schedulers import IncumbentStore, SchedulerConfig, required_horizon, run_rush
from rush.theory import compute_quantities, theorem1_min_budget

log = logging.getLogger("rush")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _add_gen_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arms", type=_positive_int, required=True)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--tasks", type=_positive_int, required=True)
    p.add_argument("--rho", type=float, default=1.0, help="cross-task relatedness in [0, 1]")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--curve-model", choices=benchgen.CURVE_MODELS, default="geometric")
    p.add_argument("--limit-spread", type=float, default=0.4)
    p.add_argument("--limit-floor", type=float, default=0.05)
    p.add_argument("--task-shift", type=float, default=0.05)
    p.add_argument("--amplitude", type=float, default=0.4)
    p.add_argument("--rate", type=float, default=0.7)
    p.add_argument("--shape-jitter", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--cost", choices=benchgen.COST_KINDS, default="constant")
    p.add_argument("--cost-location", type=float, default=1.0)
    p.add_argument("--cost-scale", type=float, default=0.5)
    p.add_argument("--tail-fraction", type=float, default=0.1)
    p.add_argument("--tail-factor", type=float, default=100.0)
    p.add_argument("--tail-shape", type=float, default=1.0)
    p.add_argument("--tail-pool", type=float, default=1.0)
    p.add_argument("--invert", action="store_true", help="append an inverted twin after every task")
    p.add_argument("-o", "--output", required=True, help="bench JSON to write")


def _add_run_args(p: argparse.ArgumentParser, scheduler: bool = True) -> None:
    p.add_argument("--bench", required=True)
    if scheduler:
        p.add_argument("--scheduler", choices=harness.SCHEDULERS, default="rush")
    p.add_argument("--eta", type=int, default=3)
    p.add_argument("--budget", type=_positive_int, help="pulls per task for SH/RUSH")
    p.add_argument("--theorem-budget", action="store_true", help="use the largest sufficient budget over the bench")
    p.add_argument("--R", type=_positive_int, help="max pulls per arm for Hyperband variants")
    p.add_argument("--sequence-length", type=_positive_int, default=20)
    p.add_argument("--repetitions", type=_positive_int, default=25)
    p.add_argument("--seed", type=_nonneg_int, default=0, help="permutation seed")
    p.add_argument("--arms-per-task", type=_positive_int)
    p.add_argument("--incumbent-cap", type=_positive_int)
    p.add_argument("--order", choices=harness.ORDERS, default="permutation")
    p.add_argument("--levels", type=_int_list)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--csv", help="per-task CSV output path")
    p.add_argument("--json", help="JSON summary output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rush", description="RUSH, SH and Hyperband on tabular benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_gen_args(sub.add_parser("gen", help="generate a synthetic bench file"))
    _add_run_args(sub.add_parser("run", help="run one scheduler over task sequences"))

    cmp_p = sub.add_parser("compare", help="paired comparison of two schedulers")
    _add_run_args(cmp_p, scheduler=False)
    cmp_p.add_argument("--baseline", choices=harness.SCHEDULERS, default="sh")
    cmp_p.add_argument("--candidate", choices=harness.SCHEDULERS, default="rush")

    sweep_p = sub.add_parser("sweep", help="paired comparison at several budgets")
    _add_run_args(sweep_p)
    sweep_p.add_argument("--budgets", type=_int_list, required=True)

    ver = sub.add_parser("verify-theorem", help="run RUSH at the sufficient budget on random instances")
    ver.add_argument("--instances", type=_nonneg_int, default=200)
    ver.add_argument("--min-arms", type=int, default=2)
    ver.add_argument("--max-arms", type=int, default=12)
    ver.add_argument("--settle-max", type=_positive_int, default=24)
    ver.add_argument("--eta", type=int, default=3)
    ver.add_argument("--seed", type=_nonneg_int, default=0)
    ver.add_argument("--json", help="report output path")

    rep = sub.add_parser("report", help="summarise a per-task CSV")
    rep.add_argument("--csv", required=True)
    rep.add_argument("--json", help="summary output path")
    return parser


def _emit(doc: dict[str, Any], path: str | None) -> None:
    if path:
        harness.write_json(doc, path)
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_gen(args: argparse.Namespace) -> int:
    spec = benchgen.FamilySpec(
        n_arms=args.arms,
        horizon=args.horizon,
        n_tasks=args.tasks,
        curve_model=args.curve_model,
        limit_spread=args.limit_spread,
        relatedness=args.rho,
        seed=args.seed,
        limit_floor=args.limit_floor,
        task_shift=args.task_shift,
        amplitude=args.amplitude,
        rate=args.rate,
        shape_jitter=args.shape_jitter,
        noise=args.noise,
    )
    cost = benchgen.CostModel(
        kind=args.cost,
        location=args.cost_location,
        scale=args.cost_scale,
        tail_fraction=args.tail_fraction,
        tail_factor=args.tail_factor,
        tail_shape=args.tail_shape,
        tail_pool=args.tail_pool,
    )
    tasks = benchgen.generate_family(spec, cost)
    if args.invert:
        tasks = benchgen.with_inverted_twins(tasks)
    benchgen.save_bench(tasks, args.output)
    doc = benchgen.spec_dict(spec, cost)
    doc["invert"] = args.invert
    doc["tasks_written"] = len(tasks)
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def _spec_from_args(args: argparse.Namespace, scheduler: str) -> harness.SequenceSpec:
    bench = tuple(benchgen.load_bench(args.bench))
    budget = args.budget
    if budget is None and args.theorem_budget:
        budget = harness.theorem_budget(bench, args.eta)
    if budget is None and args.R is not None:
        budget = harness.budget_from_R(args.R, args.eta)
    if budget is None:
        if scheduler in ("sh", "rush"):
            raise RushError("SH/RUSH need --budget, --theorem-budget or --R")
        budget = 1
    cfg = SchedulerConfig(eta=args.eta, budget=budget, incumbent_cap=args.incumbent_cap)
    return harness.SequenceSpec(
        bench=bench,
        scheduler=scheduler,
        cfg=cfg,
        sequence_length=args.sequence_length,
        repetitions=args.repetitions,
        permutation_seed=args.seed,
        arms_per_task=args.arms_per_task,
        R=args.R,
        order=args.order,
        levels=tuple(args.levels) if args.levels else None,
    )


def cmd_run(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args, args.scheduler)
    report = harness.run_sequence(spec, jobs=args.jobs)
    if args.csv:
        harness.write_csv([report], args.csv)
    _emit(report.summary(), args.json)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    base = _spec_from_args(args, args.baseline)
    cand = replace(base, scheduler=args.candidate)
    report = harness.compare(base, cand, jobs=args.jobs)
    if args.csv:
        harness.write_csv([report.baseline, report.candidate], args.csv)
    _emit(report.summary(), args.json)
    return 0


SWEEP_HEADER = ("budget", "mean_regret", "baseline_mean_regret", "time_reduction_pct", "pull_reduction_pct", "error")


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.budget is None and not args.theorem_budget and args.R is None:
        args.budget = args.budgets[0] if args.budgets else 1
    spec = _spec_from_args(args, args.scheduler)
    points = harness.budget_sweep(spec, args.budgets, jobs=args.jobs)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SWEEP_HEADER)
            for p in points:
                writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in asdict(p).values()])
    doc = {"config": spec.describe(), "budgets": list(args.budgets), "points": [asdict(p) for p in points]}
    _emit(doc, args.json)
    return 0 if all(p.error is None for p in points) else 1


def verify_theorem(instances: int, min_arms: int, max_arms: int, eta: int, seed: int, settle_max: int = 24) -> dict[str, Any]:
    """RUSH at the sufficient budget on random instances with random incumbent subsets."""
    if not 1 <= min_arms <= max_arms:
        raise RushError("need 1 <= min-arms <= max-arms")
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(instances):
        n = int(rng.integers(max(min_arms, 2), max_arms + 1))
        task = benchgen.random_instance(rng, n, settle_max, task_id=f"instance{i:05d}")
        ids = task.arm_ids
        k = int(rng.integers(0, n))
        stored = sorted(ids[j] for j in rng.choice(n, size=k, replace=False))
        q = compute_quantities(task, stored)
        budget = theorem1_min_budget(q, n, eta)
        task = benchgen.pad_task(task, required_horizon(budget, n, eta))
        new = [a for a in ids if a not in stored]
        result = run_rush(task, new, IncumbentStore(tuple(stored)), SchedulerConfig(eta, budget))
        best = true_best_arm(task)
        if result.selected != best:
            failures.append({"instance": i, "n": n, "budget": budget, "store": stored, "best": best, "selected": result.selected})
    correct = instances - len(failures)
    return {
        "config": {"instances": instances, "min_arms": min_arms, "max_arms": max_arms, "eta": eta, "seed": seed, "settle_max": settle_max},
        "instances": instances,
        "correct": correct,
        "summary": f"{correct}/{instances} correct",
        "failures": failures,
    }


def cmd_verify_theorem(args: argparse.Namespace) -> int:
    doc = verify_theorem(args.instances, args.min_arms, args.max_arms, args.eta, args.seed, args.settle_max)
    if args.json:
        harness.write_json(doc, args.json)
    sys.stdout.write(doc["summary"] + "\n")
    return 0


def summarise_rows(rows: Sequence[dict[str, str]]) -> dict[str, Any]:
    by_sched: dict[str, list[dict[str, str]]] = {}
    for row in rows:
        by_sched.setdefault(row["scheduler"], []).append(row)
    out: dict[str, Any] = {"schedulers": {}}
    for name, group in sorted(by_sched.items()):
        regrets = [float(r["regret"]) for r in group]
        pulls = [int(r["pulls"]) for r in group]
        times = [float(r["sim_time"]) for r in group]
        out["schedulers"][name] = {
            "tasks": len(group),
            "mean_regret": math.fsum(regrets) / len(regrets),
            "total_pulls": sum(pulls),
            "total_time": math.fsum(times),
        }
    for cand, base in (("rush", "sh"), ("hb_rush", "hb")):
        s = out["schedulers"]
        if cand in s and base in s and s[base]["total_time"]:
            out[f"time_reduction_pct_{cand}_vs_{base}"] = 100.0 * (s[base]["total_time"] - s[cand]["total_time"]) / s[base]["total_time"]
    return out


def cmd_report(args: argparse.Namespace) -> int:
    rows = harness.read_csv(args.csv)
    doc = summarise_rows(rows)
    doc["config"] = {"rows": len(rows)}
    _emit(doc, args.json)
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "verify-theorem": cmd_verify_theorem,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("RUSH_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (RushError, OSError, ValueError) as exc:
        sys.stderr.write(f"rush {args.command}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
