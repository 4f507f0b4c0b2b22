"""Tabular non-stochastic best-arm-identification environment.

An *arm* is a configuration identified by a string. A task stores, per arm,
the loss observed after each cumulative pull (1-indexed) and the simulated
cost of that pull. Schedulers interact with a task only through :func:`pull`,
which appends to a :class:`PullLedger` and never reveals entries past the
arm's current pull count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from rush.errors import HorizonExceeded, MissingLoss, UnknownArm

ArmId = str


def _frozen_array(values: Iterable[float] | np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValueError("curves must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LossCurve:
    """Losses after pulls 1..T. The final entry stands in for the limit."""

    losses: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_array(self.losses)
        if arr.size < 1:
            raise ValueError("a loss curve needs at least one entry")
        if not np.all(np.isfinite(arr)):
            raise ValueError("loss curves must be finite")
        object.__setattr__(self, "losses", arr)

    @property
    def horizon(self) -> int:
        return int(self.losses.size)

    @property
    def limit(self) -> float:
        return float(self.losses[-1])

    def __len__(self) -> int:
        return self.horizon

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LossCurve):
            return NotImplemented
        return np.array_equal(self.losses, other.losses)


@dataclass(frozen=True, eq=False)
class CostCurve:
    """Simulated cost of pull t, for t = 1..T."""

    costs: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_array(self.costs)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("costs must be finite and non-negative")
        object.__setattr__(self, "costs", arr)

    def __len__(self) -> int:
        return int(self.costs.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CostCurve):
            return NotImplemented
        return np.array_equal(self.costs, other.costs)


@dataclass(frozen=True, eq=False)
class TaskBench:
    """One tuning task: every arm's loss and cost curve over a shared horizon."""

    task_id: str
    arms: Mapping[ArmId, tuple[LossCurve, CostCurve]]
    horizon: int

    def __post_init__(self) -> None:
        if not self.arms:
            raise ValueError(f"task {self.task_id!r} has no arms")
        frozen: dict[ArmId, tuple[LossCurve, CostCurve]] = {}
        for arm in sorted(self.arms):
            if not isinstance(arm, str) or not arm:
                raise ValueError(f"task {self.task_id!r}: arm ids must be non-empty strings")
            loss, cost = self.arms[arm]
            if len(loss) != self.horizon or len(cost) != self.horizon:
                raise ValueError(
                    f"task {self.task_id!r}, arm {arm!r}: curve length differs from horizon {self.horizon}"
                )
            frozen[arm] = (loss, cost)
        object.__setattr__(self, "arms", frozen)

    @classmethod
    def from_arrays(
        cls,
        task_id: str,
        losses: Mapping[ArmId, Sequence[float] | np.ndarray],
        costs: Mapping[ArmId, Sequence[float] | np.ndarray] | None = None,
    ) -> "TaskBench":
        """Build a task from plain arrays; missing costs default to 1 per pull."""
        arms = {}
        horizon = None
        for arm, curve in losses.items():
            loss = LossCurve(curve)
            horizon = loss.horizon if horizon is None else horizon
            cost_values = costs[arm] if costs is not None else np.ones(loss.horizon)
            arms[arm] = (loss, CostCurve(cost_values))
        if horizon is None:
            raise ValueError(f"task {task_id!r} has no arms")
        return cls(task_id, arms, horizon)

    @property
    def arm_ids(self) -> list[ArmId]:
        return list(self.arms)

    def __contains__(self, arm: object) -> bool:
        return arm in self.arms

    def loss_curve(self, arm: ArmId) -> LossCurve:
        try:
            return self.arms[arm][0]
        except KeyError:
            raise UnknownArm(f"arm {arm!r} is not part of task {self.task_id!r}") from None

    def cost_curve(self, arm: ArmId) -> CostCurve:
        try:
            return self.arms[arm][1]
        except KeyError:
            raise UnknownArm(f"arm {arm!r} is not part of task {self.task_id!r}") from None

    def limits(self) -> dict[ArmId, float]:
        return {arm: loss.limit for arm, (loss, _) in self.arms.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaskBench):
            return NotImplemented
        return (
            self.task_id == other.task_id
            and self.horizon == other.horizon
            and list(self.arms) == list(other.arms)
            and all(self.arms[a] == other.arms[a] for a in self.arms)
        )


class LedgerEntry(NamedTuple):
    arm: ArmId
    index: int
    loss: float
    cost: float
    segment: int = 0


class PullLedger:
    """Append-only record of every pull.

    ``segment`` separates independent training runs of the same arm (one per
    Hyperband bracket); cumulative indices restart at 1 in each segment.
    """

    def __init__(self) -> None:
        self._entries: list[LedgerEntry] = []
        self._counts: dict[tuple[int, ArmId], int] = {}
        self._current: dict[tuple[int, ArmId], float] = {}
        self._arm_totals: dict[ArmId, int] = {}
        self._time = 0.0

    def record(self, arm: ArmId, losses: Sequence[float], costs: Sequence[float], segment: int = 0) -> None:
        key = (segment, arm)
        start = self._counts.get(key, 0)
        for offset, (loss, cost) in enumerate(zip(losses, costs), start=1):
            self._entries.append(LedgerEntry(arm, start + offset, loss, cost, segment))
            self._time += cost
        count = len(losses)
        if count:
            self._counts[key] = start + count
            self._current[key] = losses[-1]
            self._arm_totals[arm] = self._arm_totals.get(arm, 0) + count

    def pulls(self, arm: ArmId, segment: int | None = None) -> int:
        """Pulls of ``arm`` in one segment, or across all segments if ``segment`` is None."""
        if segment is None:
            return self._arm_totals.get(arm, 0)
        return self._counts.get((segment, arm), 0)

    def current_loss(self, arm: ArmId, segment: int = 0) -> float | None:
        return self._current.get((segment, arm))

    def run_counts(self) -> dict[tuple[int, ArmId], int]:
        """Cumulative pulls of every (segment, arm) training run."""
        return dict(self._counts)

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    @property
    def total_pulls(self) -> int:
        return len(self._entries)

    @property
    def total_time(self) -> float:
        return self._time

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[LedgerEntry]:
        return iter(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PullLedger):
            return NotImplemented
        return self._entries == other._entries

    @classmethod
    def concatenate(cls, ledgers: Sequence["PullLedger"]) -> "PullLedger":
        """Merge ledgers, giving the i-th input segment ``i``."""
        merged = cls()
        for segment, ledger in enumerate(ledgers):
            for entry in ledger:
                merged._append_entry(entry._replace(segment=segment))
        return merged

    def _append_entry(self, entry: LedgerEntry) -> None:
        key = (entry.segment, entry.arm)
        self._entries.append(entry)
        self._time += entry.cost
        self._counts[key] = entry.index
        self._current[key] = entry.loss
        self._arm_totals[entry.arm] = self._arm_totals.get(entry.arm, 0) + 1


def pull(task: TaskBench, ledger: PullLedger, arm: ArmId, count: int, segment: int = 0) -> list[float]:
    """Pull ``arm`` ``count`` more times and return the newly observed losses."""
    if arm not in task.arms:
        raise UnknownArm(f"arm {arm!r} is not part of task {task.task_id!r}")
    if count < 0:
        raise ValueError(f"pull count must be non-negative, got {count}")
    done = ledger.pulls(arm, segment)
    if done + count > task.horizon:
        raise HorizonExceeded(
            f"task {task.task_id!r}, arm {arm!r}: {done} + {count} pulls exceed horizon {task.horizon}"
        )
    loss_curve, cost_curve = task.arms[arm]
    losses = loss_curve.losses[done : done + count].tolist()
    costs = cost_curve.costs[done : done + count].tolist()
    ledger.record(arm, losses, costs, segment)
    return losses


@dataclass(frozen=True)
class Ranking:
    """Arms in ascending order of loss; ``ranks`` maps each arm to its 0-indexed position."""

    order: tuple[ArmId, ...]

    @property
    def ranks(self) -> dict[ArmId, int]:
        return {arm: pos for pos, arm in enumerate(self.order)}

    def __len__(self) -> int:
        return len(self.order)


def rank_by_current_loss(
    arms: Iterable[ArmId],
    current_losses: Mapping[ArmId, float | None],
    incumbents: Iterable[ArmId] = (),
) -> Ranking:
    """Sort by loss; ties go to incumbents first, then to the smaller arm id."""
    incumbent_set = set(incumbents)
    keyed = []
    for arm in arms:
        loss = current_losses.get(arm)
        if loss is None:
            raise MissingLoss(f"arm {arm!r} has no observed loss in this rung")
        keyed.append((loss, arm not in incumbent_set, arm))
    keyed.sort()
    return Ranking(tuple(arm for _, _, arm in keyed))


def true_best_arm(task: TaskBench) -> ArmId:
    return min(task.arms, key=lambda arm: (task.arms[arm][0].limit, arm))
