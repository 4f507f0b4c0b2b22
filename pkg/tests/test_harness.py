import math
from dataclasses import replace

import numpy as np
import pytest

from rush.benchgen import FamilySpec, generate_family, with_inverted_twins
from rush.core import PullLedger, TaskBench, pull
from rush.errors import BudgetTooSmall, InvalidSpec, SpecMismatch
from rush.harness import (
    CSV_HEADER,
    SequenceSpec,
    budget_from_R,
    budget_sweep,
    candidates_per_level,
    compare,
    read_csv,
    run_sequence,
    task_order,
    theorem_budget,
    write_csv,
)
from rush.schedulers import SchedulerConfig, bracket_pull_total, run_sh


@pytest.fixture(scope="module")
def family():
    return tuple(generate_family(FamilySpec(n_arms=27, horizon=81, n_tasks=6, seed=11)))


def spec(bench, **kw):
    base = dict(bench=bench, scheduler="rush", cfg=SchedulerConfig(3, 300), sequence_length=5, repetitions=3)
    base.update(kw)
    return SequenceSpec(**base)


def test_candidates_per_level_example():
    task = TaskBench.from_arrays("t", {f"a{i}": [0.5] * 20 for i in range(9)})
    ledger = PullLedger()
    for i in range(9):
        pull(task, ledger, f"a{i}", 20 if i < 3 else 5)
    assert candidates_per_level(ledger, [1, 5, 6, 10, 20, 21]) == {1: 9, 5: 9, 6: 3, 10: 3, 20: 3, 21: 0}
    assert candidates_per_level(PullLedger(), [1, 3]) == {1: 0, 3: 0}
    assert candidates_per_level(ledger, [1]) == {1: 9}


def test_single_task_rush_matches_sh(family):
    report = run_sequence(spec(family, sequence_length=1, repetitions=1))
    rec = report.records[0]
    task = next(t for t in family if t.task_id == rec.task_id)
    sh = run_sh(task, task.arm_ids, SchedulerConfig(3, 300))
    assert rec.selected_arm == sh.selected
    assert rec.pulls == sh.total_pulls
    assert rec.sim_time == sh.total_time


def test_related_family_later_tasks_pull_less(family):
    report = run_sequence(spec(family, repetitions=2))
    for rep in report.by_repetition():
        assert all(r.pulls < rep[0].pulls for r in rep[1:])
        assert all(r.regret == 0 for r in rep)


def test_runs_are_reproducible(family):
    a = run_sequence(spec(family))
    b = run_sequence(spec(family))
    assert a == b


def test_parallel_repetitions_match_serial(family):
    s = spec(family, repetitions=4)
    assert run_sequence(s, jobs=1) == run_sequence(s, jobs=3)


def test_compare_with_itself_is_neutral(family):
    report = compare(spec(family), spec(family))
    assert report.time_reduction_pct == 0
    assert report.regret_delta == 0
    assert report.selection_agreement() == 1


def test_rush_saves_time_on_related_family(family):
    report = compare(spec(family, scheduler="sh"), spec(family))
    assert report.time_reduction_pct > 0
    for b, c in zip(report.baseline.records, report.candidate.records):
        assert c.pulls <= b.pulls


def test_compare_rejects_unpaired_specs(family):
    with pytest.raises(SpecMismatch):
        compare(spec(family), spec(family, permutation_seed=1))
    with pytest.raises(SpecMismatch):
        compare(spec(family), spec(family[:3]))


def test_aggregates_are_exact(family):
    report = run_sequence(spec(family, repetitions=4))
    regrets = report.cumulative_regret
    assert len(regrets) == 4
    for rep, total in zip(report.by_repetition(), regrets):
        assert total == math.fsum(r.regret for r in rep)
    summary = report.summary()
    assert summary["cumulative_regret"]["sum"] == math.fsum(regrets)
    assert summary["cumulative_regret"]["mean"] * 4 == summary["cumulative_regret"]["sum"]
    assert summary["sequence_pulls"]["sum"] == sum(r.pulls for r in report.records)
    per_task = report.candidates_per_task_mean()
    values = [per_task[lvl] for lvl in report.levels]
    assert values == sorted(values, reverse=True)


def test_task_order_depends_only_on_seed_and_repetition(family):
    a = spec(family, repetitions=2)
    b = spec(family, repetitions=9, scheduler="sh", cfg=SchedulerConfig(3, 999))
    assert task_order(a, 1) == task_order(b, 1)
    assert task_order(a, 0) != task_order(a, 1) or task_order(a, 1) != task_order(a, 2)
    order = task_order(a, 0)
    assert len(set(order)) == len(order) == 5


def test_small_bench_is_sampled_with_replacement(family):
    order = task_order(spec(family[:2], sequence_length=7), 0)
    assert len(order) == 7 and set(order) <= {0, 1}


def test_twin_order_keeps_pairs_together():
    bench = tuple(with_inverted_twins(generate_family(FamilySpec(n_arms=9, horizon=9, n_tasks=4))))
    s = spec(bench, order="twins", sequence_length=6, cfg=SchedulerConfig(3, 36))
    ids = [bench[i].task_id for i in task_order(s, 0)]
    for first, second in zip(ids[::2], ids[1::2]):
        assert first.removesuffix("-inv") == second.removesuffix("-inv")
        assert first != second


def test_twin_order_needs_twins(family):
    with pytest.raises(InvalidSpec):
        run_sequence(spec(family, order="twins"))


def test_arm_sampling_is_shared_between_schedulers(family):
    cfg = SchedulerConfig(3, 100)
    report = compare(spec(family, scheduler="sh", arms_per_task=9, cfg=cfg), spec(family, arms_per_task=9, cfg=cfg))
    assert [r.n_arms for r in report.baseline.records] == [9] * 15
    assert all(c.n_arms >= 9 for c in report.candidate.records)


def test_invalid_specs(family):
    for bad in (
        spec(family, sequence_length=0),
        spec(family, arms_per_task=28),
        spec(family, scheduler="hb"),
        spec(family, scheduler="asha"),
        spec(family, levels=(3, 1)),
        spec((), sequence_length=1),
    ):
        with pytest.raises(InvalidSpec):
            run_sequence(bad)


def test_errors_carry_position(family):
    with pytest.raises(BudgetTooSmall, match="position 0"):
        run_sequence(spec(family, cfg=SchedulerConfig(3, 10)))


def test_hyperband_sequences(family):
    hb = spec(family, scheduler="hb", R=27)
    report = compare(hb, replace(hb, scheduler="hb_rush"))
    assert report.baseline.records[0].store_size == 0
    assert [r.store_size for r in report.candidate.by_repetition()[0]] == [0, 1, 1, 1, 1]
    assert report.candidate.mean_task_regret <= report.baseline.mean_task_regret


def test_budget_from_R_is_one_bracket():
    assert budget_from_R(9, 3) == bracket_pull_total(9, 3) == 9 + 3 * 2 + 6


def test_theorem_budget_is_sufficient_on_family(family):
    budget = theorem_budget(family, 3)
    bench = tuple(generate_family(FamilySpec(n_arms=27, horizon=2048, n_tasks=6, seed=11)))
    report = run_sequence(spec(bench, cfg=SchedulerConfig(3, budget), repetitions=2))
    assert report.mean_task_regret == 0


def test_budget_sweep(family):
    base = spec(family)
    points = budget_sweep(base, [10, 100, 200, 300])
    assert points[0].error and "BudgetTooSmall" in points[0].error
    regrets = [p.mean_regret for p in points[1:]]
    assert all(p.error is None for p in points[1:])
    assert regrets == sorted(regrets, reverse=True)
    single = budget_sweep(base, [300])[0]
    direct = compare(replace(base, scheduler="sh"), base)
    assert single.time_reduction_pct == direct.time_reduction_pct
    assert single.mean_regret == direct.candidate.mean_task_regret
    with pytest.raises(ValueError):
        budget_sweep(base, [300, 150])


def test_budget_sweep_on_hyperband_varies_R(family):
    points = budget_sweep(spec(family, scheduler="hb_rush", R=9), [9, 27])
    assert [p.budget for p in points] == [9, 27]
    assert all(p.error is None for p in points)


def test_csv_round_trip(tmp_path, family):
    report = run_sequence(spec(family, repetitions=2))
    path = tmp_path / "r.csv"
    write_csv([report], path)
    rows = read_csv(path)
    assert len(rows) == 10
    assert tuple(rows[0]) == CSV_HEADER
    assert [float(r["regret"]) for r in rows] == [r.regret for r in report.records]
    path.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidSpec):
        read_csv(path)


def test_levels_override(family):
    report = run_sequence(spec(family, levels=(1, 2, 50)))
    assert report.levels == (1, 2, 50)
    assert np.all(np.array([r.candidates[0] for r in report.records]) >= 1)
