"""Sequences of tuning tasks: scheduler runs, incumbent carry-over and metrics."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from rush.benchgen import INVERTED_SUFFIX
from rush.core import PullLedger, TaskBench, true_best_arm
from rush.errors import InvalidSpec, RushError, SpecMismatch
from rush.schedulers import (
    BaiResult,
    IncumbentStore,
    SchedulerConfig,
    bracket_pull_total,
    run_hyperband,
    run_rush,
    run_sh,
    update_store,
)
from rush.theory import compute_quantities, theorem1_min_budget

SCHEDULERS = ("sh", "rush", "hb", "hb_rush")
ORDERS = ("permutation", "twins")
CSV_HEADER = ("repetition", "position", "task_id", "scheduler", "selected_arm", "regret", "pulls", "sim_time")
BASELINE_OF = {"rush": "sh", "hb_rush": "hb", "sh": "sh", "hb": "hb"}


@dataclass(frozen=True, eq=False)
class SequenceSpec:
    """One experiment: ``repetitions`` sequences of ``sequence_length`` tasks drawn from ``bench``.

    ``arms_per_task=None`` offers every arm of a task. ``order="twins"`` draws
    (task, inverted twin) pairs and shuffles each pair.
    """

    bench: tuple[TaskBench, ...]
    scheduler: str = "rush"
    cfg: SchedulerConfig = field(default_factory=SchedulerConfig)
    sequence_length: int = 20
    repetitions: int = 25
    permutation_seed: int = 0
    arms_per_task: int | None = None
    R: int | None = None
    order: str = "permutation"
    levels: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "bench", tuple(self.bench))
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(self.levels))

    def validate(self) -> None:
        if not self.bench:
            raise InvalidSpec("bench has no tasks")
        if self.scheduler not in SCHEDULERS:
            raise InvalidSpec(f"scheduler must be one of {SCHEDULERS}, got {self.scheduler!r}")
        if self.sequence_length < 1 or self.repetitions < 1:
            raise InvalidSpec("sequence_length and repetitions must be >= 1")
        if self.order not in ORDERS:
            raise InvalidSpec(f"order must be one of {ORDERS}, got {self.order!r}")
        smallest = min(len(task.arms) for task in self.bench)
        if self.arms_per_task is not None and not 1 <= self.arms_per_task <= smallest:
            raise InvalidSpec(f"arms_per_task must lie in [1, {smallest}], got {self.arms_per_task}")
        if self.scheduler in ("hb", "hb_rush") and (self.R is None or self.R < 1):
            raise InvalidSpec("Hyperband schedulers need R >= 1")
        if self.levels is not None and (list(self.levels) != sorted(set(self.levels)) or self.levels[0] < 1):
            raise InvalidSpec("levels must be strictly ascending and >= 1")
        if self.order == "twins":
            _twin_pairs(self.bench)

    def resolved_levels(self) -> tuple[int, ...]:
        if self.levels is not None:
            return self.levels
        horizon = max(task.horizon for task in self.bench)
        levels, level = [], 1
        while level < horizon:
            levels.append(level)
            level *= self.cfg.eta
        levels.append(horizon)
        return tuple(levels)

    def describe(self) -> dict[str, Any]:
        return {
            "scheduler": self.scheduler,
            "eta": self.cfg.eta,
            "budget": self.cfg.budget,
            "incumbent_cap": self.cfg.incumbent_cap,
            "sequence_length": self.sequence_length,
            "repetitions": self.repetitions,
            "permutation_seed": self.permutation_seed,
            "arms_per_task": self.arms_per_task,
            "R": self.R,
            "order": self.order,
            "levels": list(self.resolved_levels()),
            "bench_tasks": [task.task_id for task in self.bench],
        }


@dataclass(frozen=True)
class TaskRecord:
    repetition: int
    position: int
    task_id: str
    scheduler: str
    selected_arm: str
    regret: float
    pulls: int
    sim_time: float
    n_arms: int
    store_size: int
    rung0_pulls: int
    candidates: tuple[int, ...]  # per level of the report

    def csv_row(self) -> list[str]:
        return [
            str(self.repetition),
            str(self.position),
            self.task_id,
            self.scheduler,
            self.selected_arm,
            repr(self.regret),
            str(self.pulls),
            repr(self.sim_time),
        ]


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def _std(values: Sequence[float]) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


@dataclass(frozen=True)
class SequenceReport:
    """Per-task records of every repetition plus exact aggregates.

    Sums use :func:`math.fsum` (correctly rounded, independent of order); a
    mean is always its sum divided by the count.
    """

    config: dict[str, Any]
    levels: tuple[int, ...]
    records: tuple[TaskRecord, ...]

    def by_repetition(self) -> list[list[TaskRecord]]:
        reps: dict[int, list[TaskRecord]] = {}
        for rec in self.records:
            reps.setdefault(rec.repetition, []).append(rec)
        return [reps[r] for r in sorted(reps)]

    @property
    def cumulative_regret(self) -> tuple[float, ...]:
        return tuple(math.fsum(r.regret for r in rep) for rep in self.by_repetition())

    @property
    def sequence_pulls(self) -> tuple[int, ...]:
        return tuple(sum(r.pulls for r in rep) for rep in self.by_repetition())

    @property
    def sequence_time(self) -> tuple[float, ...]:
        return tuple(math.fsum(r.sim_time for r in rep) for rep in self.by_repetition())

    @property
    def total_pulls(self) -> int:
        return sum(r.pulls for r in self.records)

    @property
    def total_time(self) -> float:
        return math.fsum(r.sim_time for r in self.records)

    @property
    def mean_task_regret(self) -> float:
        return _mean([r.regret for r in self.records])

    def candidates_per_task_mean(self) -> dict[int, float]:
        counts = np.array([r.candidates for r in self.records], dtype=np.int64).reshape(len(self.records), -1)
        return {lvl: int(counts[:, i].sum()) / len(self.records) for i, lvl in enumerate(self.levels)}

    def candidates_per_sequence_mean(self) -> dict[int, float]:
        reps = self.by_repetition()
        out = {}
        for i, lvl in enumerate(self.levels):
            out[lvl] = sum(sum(r.candidates[i] for r in rep) for rep in reps) / len(reps)
        return out

    def summary(self) -> dict[str, Any]:
        regrets = list(self.cumulative_regret)
        times = list(self.sequence_time)
        pulls = [float(p) for p in self.sequence_pulls]
        return {
            "config": self.config,
            "tasks_run": len(self.records),
            "cumulative_regret": {"sum": math.fsum(regrets), "mean": _mean(regrets), "std": _std(regrets)},
            "mean_task_regret": self.mean_task_regret,
            "sequence_pulls": {"sum": self.total_pulls, "mean": _mean(pulls), "std": _std(pulls)},
            "sequence_time": {"sum": self.total_time, "mean": _mean(times), "std": _std(times)},
            "candidates_per_level": {
                "per_task_mean": {str(k): v for k, v in self.candidates_per_task_mean().items()},
                "per_sequence_total_mean": {str(k): v for k, v in self.candidates_per_sequence_mean().items()},
            },
        }


def _pct_reduction(base: float, cand: float) -> float:
    return 100.0 * (base - cand) / base if base else 0.0


@dataclass(frozen=True)
class ComparisonReport:
    baseline: SequenceReport
    candidate: SequenceReport

    @property
    def time_reduction_pct(self) -> float:
        """Pooled over every task of every repetition."""
        return _pct_reduction(self.baseline.total_time, self.candidate.total_time)

    @property
    def pull_reduction_pct(self) -> float:
        return _pct_reduction(self.baseline.total_pulls, self.candidate.total_pulls)

    @property
    def regret_delta(self) -> float:
        return _mean(self.candidate.cumulative_regret) - _mean(self.baseline.cumulative_regret)

    def per_repetition_time_reduction(self) -> list[float]:
        return [_pct_reduction(b, c) for b, c in zip(self.baseline.sequence_time, self.candidate.sequence_time)]

    def selection_agreement(self) -> float:
        same = sum(b.selected_arm == c.selected_arm for b, c in zip(self.baseline.records, self.candidate.records))
        return same / len(self.baseline.records)

    def summary(self) -> dict[str, Any]:
        per_rep = self.per_repetition_time_reduction()
        return {
            "baseline": self.baseline.summary(),
            "candidate": self.candidate.summary(),
            "time_reduction_pct": self.time_reduction_pct,
            "time_reduction_pct_per_repetition": {"mean": _mean(per_rep), "std": _std(per_rep)},
            "pull_reduction_pct": self.pull_reduction_pct,
            "regret_delta": self.regret_delta,
            "selection_agreement": self.selection_agreement(),
        }


def candidates_per_level(ledger: PullLedger, levels: Iterable[int]) -> dict[int, int]:
    """Number of training runs whose cumulative pulls reached each level."""
    counts = np.sort(np.fromiter(ledger.run_counts().values(), dtype=np.int64))
    return {lvl: int(counts.size - np.searchsorted(counts, lvl, side="left")) for lvl in levels}


def _twin_pairs(bench: Sequence[TaskBench]) -> list[tuple[int, int]]:
    index = {task.task_id: i for i, task in enumerate(bench)}
    pairs = []
    for task_id, i in index.items():
        if task_id.endswith(INVERTED_SUFFIX):
            continue
        j = index.get(task_id + INVERTED_SUFFIX)
        if j is None:
            raise InvalidSpec(f"task {task_id!r} has no inverted twin")
        pairs.append((i, j))
    if not pairs:
        raise InvalidSpec("bench has no (task, inverted twin) pairs")
    return pairs


def task_order(spec: SequenceSpec, repetition: int) -> list[int]:
    """Bench indices visited in one repetition; depends only on the seed and repetition."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.permutation_seed, repetition, 0]))
    S = spec.sequence_length
    if spec.order == "twins":
        pairs = _twin_pairs(spec.bench)
        n_pairs = -(-S // 2)
        picks = rng.permutation(len(pairs))[:n_pairs] if len(pairs) >= n_pairs else rng.integers(0, len(pairs), n_pairs)
        order: list[int] = []
        for p in picks:
            first, second = pairs[int(p)]
            order.extend([first, second] if rng.integers(0, 2) == 0 else [second, first])
        return order[:S]
    if len(spec.bench) >= S:
        return [int(i) for i in rng.permutation(len(spec.bench))[:S]]
    return [int(i) for i in rng.integers(0, len(spec.bench), S)]


class ArmStream:
    """Deterministic stream of arms from one task; reshuffles once exhausted."""

    def __init__(self, arms: Sequence[str], rng: np.random.Generator) -> None:
        self._arms = sorted(arms)
        self._rng = rng
        self._queue: list[str] = []

    def __call__(self, count: int) -> list[str]:
        out: list[str] = []
        while len(out) < count:
            if not self._queue:
                self._queue = [self._arms[i] for i in self._rng.permutation(len(self._arms))]
            out.append(self._queue.pop(0))
        return out


def _arm_rng(spec: SequenceSpec, repetition: int, position: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([spec.permutation_seed, repetition, 1, position]))


def sample_arms(spec: SequenceSpec, task: TaskBench, repetition: int, position: int) -> list[str]:
    arms = task.arm_ids
    k = len(arms) if spec.arms_per_task is None else spec.arms_per_task
    if k == len(arms):
        return list(arms)
    picks = _arm_rng(spec, repetition, position).choice(len(arms), size=k, replace=False)
    return sorted(arms[int(i)] for i in picks)


def _run_one(spec: SequenceSpec, task: TaskBench, store: IncumbentStore, repetition: int, position: int) -> BaiResult:
    cfg = spec.cfg
    if spec.scheduler == "sh":
        return run_sh(task, sample_arms(spec, task, repetition, position), cfg)
    if spec.scheduler == "rush":
        return run_rush(task, sample_arms(spec, task, repetition, position), store, cfg)
    stream = ArmStream(task.arm_ids, _arm_rng(spec, repetition, position))
    inc = store if spec.scheduler == "hb_rush" else None
    assert spec.R is not None
    return run_hyperband(task, stream, inc, cfg, spec.R)


def run_repetition(spec: SequenceSpec, repetition: int) -> list[TaskRecord]:
    levels = spec.resolved_levels()
    store = IncumbentStore(cap=spec.cfg.incumbent_cap)
    carries_store = spec.scheduler in ("rush", "hb_rush")
    records = []
    for position, idx in enumerate(task_order(spec, repetition)):
        task = spec.bench[idx]
        try:
            result = _run_one(spec, task, store, repetition, position)
        except RushError as exc:
            raise type(exc)(f"repetition {repetition}, position {position}, task {task.task_id!r}: {exc}") from exc
        limits = task.limits()
        regret = limits[result.selected] - limits[true_best_arm(task)]
        first_rung = [r for r in result.rung_trace if r.k == 0]
        counts = candidates_per_level(result.ledger, levels)
        records.append(
            TaskRecord(
                repetition=repetition,
                position=position,
                task_id=task.task_id,
                scheduler=spec.scheduler,
                selected_arm=result.selected,
                regret=regret,
                pulls=result.total_pulls,
                sim_time=result.total_time,
                n_arms=len(first_rung[0].active) if first_rung else 1,
                store_size=sum(a in task for a in store.entries) if carries_store else 0,
                rung0_pulls=first_rung[0].pulls if first_rung else 0,
                candidates=tuple(counts[lvl] for lvl in levels),
            )
        )
        if carries_store:
            store = update_store(store, result.selected)
    return records


_WORKER_SPEC: SequenceSpec | None = None


def _init_worker(spec: SequenceSpec) -> None:
    global _WORKER_SPEC
    _WORKER_SPEC = spec


def _worker_repetition(repetition: int) -> list[TaskRecord]:
    assert _WORKER_SPEC is not None
    return run_repetition(_WORKER_SPEC, repetition)


def run_sequence(spec: SequenceSpec, jobs: int = 1) -> SequenceReport:
    """Run every repetition; output is independent of ``jobs``."""
    spec.validate()
    reps = range(spec.repetitions)
    if jobs > 1 and spec.repetitions > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(spec,)) as pool:
            chunks = list(pool.map(_worker_repetition, reps))
    else:
        chunks = [run_repetition(spec, r) for r in reps]
    records = tuple(rec for chunk in chunks for rec in chunk)
    return SequenceReport(spec.describe(), spec.resolved_levels(), records)


_PAIRED_FIELDS = ("cfg", "sequence_length", "repetitions", "permutation_seed", "arms_per_task", "R", "order", "levels")


def check_paired(spec_a: SequenceSpec, spec_b: SequenceSpec) -> None:
    for name in _PAIRED_FIELDS:
        if getattr(spec_a, name) != getattr(spec_b, name):
            raise SpecMismatch(f"specs differ in {name}: {getattr(spec_a, name)!r} vs {getattr(spec_b, name)!r}")
    if spec_a.bench is not spec_b.bench and spec_a.bench != spec_b.bench:
        raise SpecMismatch("specs use different benches")


def compare(baseline: SequenceSpec, candidate: SequenceSpec, jobs: int = 1) -> ComparisonReport:
    """Paired comparison: same permutations, same sampled arms, only the scheduler differs."""
    check_paired(baseline, candidate)
    return ComparisonReport(run_sequence(baseline, jobs), run_sequence(candidate, jobs))


@dataclass(frozen=True)
class SweepPoint:
    budget: int
    mean_regret: float | None
    baseline_mean_regret: float | None
    time_reduction_pct: float | None
    pull_reduction_pct: float | None
    error: str | None = None


def _with_budget(spec: SequenceSpec, budget: int) -> SequenceSpec:
    if spec.scheduler in ("hb", "hb_rush"):
        return replace(spec, R=budget)
    return replace(spec, cfg=replace(spec.cfg, budget=budget))


def budget_sweep(spec: SequenceSpec, budgets: Sequence[int], jobs: int = 1) -> list[SweepPoint]:
    """One paired run against the scheduler's baseline per budget (R for Hyperband variants)."""
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be ascending")
    points = []
    for budget in budgets:
        try:
            cand = _with_budget(spec, budget)
            report = compare(replace(cand, scheduler=BASELINE_OF[spec.scheduler]), cand, jobs)
        except (RushError, ValueError) as exc:
            points.append(SweepPoint(budget, None, None, None, None, f"{type(exc).__name__}: {exc}"))
            continue
        points.append(
            SweepPoint(
                budget,
                report.candidate.mean_task_regret,
                report.baseline.mean_task_regret,
                report.time_reduction_pct,
                report.pull_reduction_pct,
            )
        )
    return points


def budget_from_R(R: int, eta: int) -> int:
    """SH/RUSH budget matching one Hyperband bracket (the most exploratory one)."""
    return bracket_pull_total(R, eta)


def theorem_budget(bench: Sequence[TaskBench], eta: int, incumbents: Iterable[str] | None = None) -> int:
    """Largest sufficient per-task budget over a bench, offering every arm of each task.

    ``incumbents`` defaults to the set of true best arms across the bench,
    i.e. every arm that a correct run could have stored.
    """
    inc = set(incumbents) if incumbents is not None else {true_best_arm(task) for task in bench}
    return max(
        theorem1_min_budget(compute_quantities(task, [a for a in inc if a in task]), len(task.arms), eta)
        for task in bench
    )


def records_csv(reports: Sequence[SequenceReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for report in reports:
        for rec in report.records:
            writer.writerow(rec.csv_row())
    return buf.getvalue()


def write_csv(reports: Sequence[SequenceReport], path: str | Path) -> None:
    Path(path).write_text(records_csv(reports))


def write_json(doc: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise InvalidSpec(f"{path}: unexpected CSV header {reader.fieldnames}")
        return list(reader)
