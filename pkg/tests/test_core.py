import numpy as np
import pytest

from oracles import brute_force_ranking
from rush.core import CostCurve, LossCurve, PullLedger, TaskBench, pull, rank_by_current_loss, true_best_arm
from rush.errors import HorizonExceeded, MissingLoss, UnknownArm


@pytest.fixture
def task():
    return TaskBench.from_arrays("t", {"a": [0.9, 0.5, 0.4], "b": [0.8, 0.7, 0.6]})


def test_pull_reads_prefix(task):
    ledger = PullLedger()
    assert pull(task, ledger, "a", 2) == [0.9, 0.5]
    assert ledger.current_loss("a") == 0.5
    assert ledger.pulls("a") == 2


def test_pull_zero_leaves_ledger_alone(task):
    ledger = PullLedger()
    assert pull(task, ledger, "a", 0) == []
    assert len(ledger) == 0
    assert ledger.current_loss("a") is None


def test_successive_pulls_continue_where_they_stopped(task):
    ledger = PullLedger()
    pull(task, ledger, "a", 1)
    pull(task, ledger, "a", 2)
    assert ledger.current_loss("a") == 0.4
    assert [e.index for e in ledger.entries] == [1, 2, 3]
    assert [e.loss for e in ledger.entries] == [0.9, 0.5, 0.4]


def test_pull_errors(task):
    ledger = PullLedger()
    with pytest.raises(UnknownArm):
        pull(task, ledger, "zz", 1)
    with pytest.raises(ValueError):
        pull(task, ledger, "a", -1)
    pull(task, ledger, "a", 3)
    with pytest.raises(HorizonExceeded):
        pull(task, ledger, "a", 1)
    assert ledger.pulls("a") == 3


def test_ledger_time_and_segments():
    task = TaskBench.from_arrays("t", {"a": [0.5, 0.4]}, {"a": [2.0, 3.0]})
    ledger = PullLedger()
    pull(task, ledger, "a", 2, segment=0)
    pull(task, ledger, "a", 1, segment=1)
    assert ledger.total_time == 7.0
    assert ledger.pulls("a") == 3
    assert ledger.pulls("a", segment=1) == 1
    assert ledger.current_loss("a", segment=1) == 0.5
    assert ledger.run_counts() == {(0, "a"): 2, (1, "a"): 1}


def test_concatenate_renumbers_segments():
    task = TaskBench.from_arrays("t", {"a": [0.5, 0.4]})
    one, two = PullLedger(), PullLedger()
    pull(task, one, "a", 2)
    pull(task, two, "a", 1)
    merged = PullLedger.concatenate([one, two])
    assert [e.segment for e in merged] == [0, 0, 1]
    assert merged.pulls("a", 1) == 1
    assert merged.total_time == 3.0


def test_rank_simple():
    ranking = rank_by_current_loss({"a", "b", "c"}, {"a": 0.2, "b": 0.1, "c": 0.3})
    assert ranking.ranks == {"b": 0, "a": 1, "c": 2}


def test_rank_tie_prefers_incumbent():
    assert rank_by_current_loss(["a", "b"], {"a": 0.2, "b": 0.2}, {"b"}).ranks == {"b": 0, "a": 1}


@pytest.mark.parametrize("incumbents", [set(), {"d"}, {"e", "b"}, {"a", "b", "c", "d", "e", "f"}])
def test_rank_two_tied_pairs_matches_exhaustive_order(incumbents):
    losses = {"a": 0.3, "b": 0.1, "c": 0.3, "d": 0.5, "e": 0.1, "f": 0.2}
    ranking = rank_by_current_loss(losses, losses, incumbents)
    assert list(ranking.order) == brute_force_ranking(losses, incumbents)


def test_rank_missing_loss():
    with pytest.raises(MissingLoss):
        rank_by_current_loss(["a", "b"], {"a": 0.1})


def test_true_best_arm_examples():
    assert true_best_arm(TaskBench.from_arrays("t", {"x": [0.4]})) == "x"
    bench = TaskBench.from_arrays("t", {"a": [0.5, 0.3], "b": [0.5, 0.1], "c": [0.5, 0.2]})
    assert true_best_arm(bench) == "b"


def test_true_best_arm_large_task_scan():
    rng = np.random.default_rng(3)
    curves = {f"arm{i:04d}": rng.uniform(size=4) for i in range(1000)}
    task = TaskBench.from_arrays("big", curves)
    best, best_loss = None, np.inf
    for arm, curve in curves.items():
        if curve[-1] < best_loss:
            best, best_loss = arm, curve[-1]
    assert true_best_arm(task) == best


def test_curves_reject_bad_values():
    with pytest.raises(ValueError):
        LossCurve([0.1, float("nan")])
    with pytest.raises(ValueError):
        LossCurve([])
    with pytest.raises(ValueError):
        CostCurve([1.0, -0.5])


def test_curves_are_read_only():
    curve = LossCurve([0.3, 0.2])
    with pytest.raises(ValueError):
        curve.losses[0] = 0.0


def test_task_rejects_mismatched_horizons():
    with pytest.raises(ValueError):
        TaskBench.from_arrays("t", {"a": [0.1, 0.2], "b": [0.1]})


def test_task_equality_and_lookup(task):
    same = TaskBench.from_arrays("t", {"b": [0.8, 0.7, 0.6], "a": [0.9, 0.5, 0.4]})
    assert task == same
    assert task.arm_ids == ["a", "b"]
    assert task.limits() == {"a": 0.4, "b": 0.6}
    with pytest.raises(UnknownArm):
        task.loss_curve("nope")
