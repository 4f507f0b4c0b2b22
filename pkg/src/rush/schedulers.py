"""Successive Halving, RUSH, Hyperband and HB-RUSH over a tabular task.

All schedulers are synchronous and rung based. RUSH differs from SH only in
the keep rule: arms ranked at or below the best-ranked incumbent still in
the rung are dropped, on top of the usual cut by a factor ``eta``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from rush.core import ArmId, PullLedger, Ranking, TaskBench, pull, rank_by_current_loss
from rush.errors import BudgetTooSmall, FormatError, InvalidSpec, UnknownArm

log = logging.getLogger(__name__)


def ceil_log(n: int, base: int) -> int:
    """Smallest L >= 0 with base**L >= n, in exact integer arithmetic."""
    if n < 1 or base < 2:
        raise ValueError(f"ceil_log needs n >= 1 and base >= 2, got n={n}, base={base}")
    level, power = 0, 1
    while power < n:
        power *= base
        level += 1
    return level


def floor_log(n: int, base: int) -> int:
    """Largest s >= 0 with base**s <= n."""
    if n < 1 or base < 2:
        raise ValueError(f"floor_log needs n >= 1 and base >= 2, got n={n}, base={base}")
    level, power = 0, base
    while power <= n:
        power *= base
        level += 1
    return level


@dataclass(frozen=True)
class SchedulerConfig:
    eta: int = 3
    budget: int = 1
    incumbent_cap: int | None = None

    def __post_init__(self) -> None:
        if self.eta < 2:
            raise InvalidSpec(f"eta must be >= 2, got {self.eta}")
        if self.budget < 1:
            raise InvalidSpec(f"budget must be >= 1, got {self.budget}")
        if self.incumbent_cap is not None and self.incumbent_cap < 1:
            raise InvalidSpec(f"incumbent_cap must be positive or None, got {self.incumbent_cap}")


@dataclass(frozen=True)
class IncumbentStore:
    """Insertion-ordered set of past winners with FIFO eviction. ``cap=None`` is unbounded."""

    entries: tuple[ArmId, ...] = ()
    cap: int | None = None

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        if len(set(entries)) != len(entries):
            raise ValueError("incumbent store entries must be distinct")
        if self.cap is not None:
            if self.cap < 1:
                raise ValueError(f"store cap must be positive, got {self.cap}")
            if len(entries) > self.cap:
                raise ValueError(f"{len(entries)} entries exceed store cap {self.cap}")
        object.__setattr__(self, "entries", entries)

    def __contains__(self, arm: object) -> bool:
        return arm in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> str:
        return json.dumps({"cap": self.cap, "entries": list(self.entries)})

    @classmethod
    def from_json(cls, text: str) -> "IncumbentStore":
        try:
            doc = json.loads(text)
            cap, entries = doc["cap"], doc["entries"]
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"malformed incumbent store: {exc}") from exc
        if cap is not None and not isinstance(cap, int) or not all(isinstance(e, str) for e in entries):
            raise FormatError("incumbent store needs an integer (or null) cap and string entries")
        try:
            return cls(tuple(entries), cap)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "IncumbentStore":
        return cls.from_json(Path(path).read_text())


def update_store(store: IncumbentStore, selected: ArmId) -> IncumbentStore:
    if selected in store:
        return store
    entries = store.entries + (selected,)
    if store.cap is not None and len(entries) > store.cap:
        entries = entries[len(entries) - store.cap :]
    return IncumbentStore(entries, store.cap)


@dataclass(frozen=True)
class RungRecord:
    k: int
    active: tuple[ArmId, ...]  # in rank order
    pulls: int  # additional pulls given to each active arm in this rung
    r_star: int | None  # None when no incumbent is active
    threshold: int
    survivors: tuple[ArmId, ...]
    bracket: int | None = None


@dataclass(frozen=True, eq=False)
class BaiResult:
    selected: ArmId
    ledger: PullLedger
    rung_trace: tuple[RungRecord, ...]
    selected_loss: float | None = None
    skipped_incumbents: tuple[ArmId, ...] = ()

    @property
    def total_pulls(self) -> int:
        return self.ledger.total_pulls

    @property
    def total_time(self) -> float:
        return self.ledger.total_time

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BaiResult):
            return NotImplemented
        return (
            self.selected == other.selected
            and self.ledger == other.ledger
            and self.rung_trace == other.rung_trace
            and self.selected_loss == other.selected_loss
            and self.skipped_incumbents == other.skipped_incumbents
        )


@dataclass(frozen=True)
class BracketOutcome:
    s: int
    n: int
    r: int
    selected: ArmId
    loss: float


@dataclass(frozen=True, eq=False)
class HyperbandResult(BaiResult):
    brackets: tuple[BracketOutcome, ...] = field(default=())


def pulls_per_arm(budget: int, n: int, k: int, eta: int) -> int:
    """floor(B / (max(1, floor(n / eta^k)) * ceil(log_eta n)))."""
    if n < 2 or k < 0 or eta < 2 or budget < 1:
        raise ValueError(f"pulls_per_arm needs n>=2, k>=0, eta>=2, B>=1; got n={n}, k={k}, eta={eta}, B={budget}")
    pulls = budget // (max(1, n // eta**k) * ceil_log(n, eta))
    if pulls == 0 and k == 0:
        raise BudgetTooSmall(f"budget {budget} gives zero pulls per arm for n={n}, eta={eta}")
    return pulls


def rush_schedule(budget: int, n: int, eta: int) -> list[int]:
    """Per-rung pull counts of SH/RUSH for ``n`` arms; empty when n == 1."""
    if n == 1:
        return []
    return [pulls_per_arm(budget, n, k, eta) for k in range(ceil_log(n, eta))]


def required_horizon(budget: int, n: int, eta: int) -> int:
    """Cumulative pulls of an arm that survives every rung."""
    return sum(rush_schedule(budget, n, eta))


def keep_threshold(r_star: int | None, n: int, k: int, eta: int) -> int:
    cut = n // eta ** (k + 1)
    if r_star is not None:
        cut = min(r_star, cut)
    return max(cut, 1)


def keep_set(
    ranking: Ranking,
    incumbents_active: Iterable[ArmId],
    n: int,
    k: int,
    eta: int,
) -> list[ArmId]:
    """Survivors of rung ``k``: the ranking prefix above the threshold, best first."""
    ranks = ranking.ranks
    inc_ranks = [ranks[a] for a in incumbents_active if a in ranks]
    r_star = min(inc_ranks) if inc_ranks else None
    threshold = keep_threshold(r_star, n, k, eta)
    return list(ranking.order[:threshold])


def _run_rungs(
    task: TaskBench,
    arms: Sequence[ArmId],
    incumbents: Sequence[ArmId],
    rung_pulls: Sequence[int],
    eta: int,
    ledger: PullLedger,
    segment: int = 0,
    bracket: int | None = None,
) -> tuple[ArmId, float | None, list[RungRecord]]:
    n = len(arms)
    inc = set(incumbents)
    active = sorted(arms)
    trace: list[RungRecord] = []
    if not rung_pulls:
        return active[0], None, trace
    ranking = None
    for k, count in enumerate(rung_pulls):
        for arm in active:
            pull(task, ledger, arm, count, segment)
        losses = {arm: ledger.current_loss(arm, segment) for arm in active}
        ranking = rank_by_current_loss(active, losses, inc)
        ranks = ranking.ranks
        inc_ranks = [ranks[a] for a in active if a in inc]
        r_star = min(inc_ranks) if inc_ranks else None
        survivors = keep_set(ranking, [a for a in active if a in inc], n, k, eta)
        trace.append(
            RungRecord(k, ranking.order, count, r_star, keep_threshold(r_star, n, k, eta), tuple(survivors), bracket)
        )
        active = sorted(survivors)
    best = ranking.order[0]
    return best, ledger.current_loss(best, segment), trace


def _split_incumbents(task: TaskBench, store: IncumbentStore) -> tuple[list[ArmId], tuple[ArmId, ...]]:
    present = [a for a in store.entries if a in task]
    skipped = tuple(a for a in store.entries if a not in task)
    if skipped:
        log.warning("task %s: %d incumbent(s) absent from bench skipped", task.task_id, len(skipped))
    return present, skipped


def _check_arms(task: TaskBench, arms: Iterable[ArmId]) -> list[ArmId]:
    arms = list(dict.fromkeys(arms))
    for arm in arms:
        if arm not in task:
            raise UnknownArm(f"arm {arm!r} is not part of task {task.task_id!r}")
    return arms


def run_rush(
    task: TaskBench,
    new_arms: Iterable[ArmId],
    store: IncumbentStore,
    cfg: SchedulerConfig,
) -> BaiResult:
    """One RUSH best-arm-identification run. ``store`` is read, never modified."""
    new = _check_arms(task, new_arms)
    present, skipped = _split_incumbents(task, store)
    arms = sorted(set(new) | set(present))
    if not arms:
        raise ValueError("run_rush needs at least one arm")
    schedule = rush_schedule(cfg.budget, len(arms), cfg.eta)
    ledger = PullLedger()
    selected, loss, trace = _run_rungs(task, arms, present, schedule, cfg.eta, ledger)
    return BaiResult(selected, ledger, tuple(trace), loss, skipped)


def run_sh(task: TaskBench, arms: Iterable[ArmId], cfg: SchedulerConfig) -> BaiResult:
    return run_rush(task, arms, IncumbentStore(), cfg)


def hyperband_brackets(R: int, eta: int) -> list[tuple[int, int]]:
    """(n_s, r_s) for s = s_max down to 0, with s_max = floor(log_eta R)."""
    if R < 1 or eta < 2:
        raise ValueError(f"hyperband_brackets needs R >= 1 and eta >= 2, got R={R}, eta={eta}")
    s_max = floor_log(R, eta)
    brackets = []
    for s in range(s_max, -1, -1):
        n = -(-(s_max + 1) * eta**s // (s + 1))
        brackets.append((n, R // eta**s))
    return brackets


def bracket_levels(R: int, eta: int, s: int) -> list[int]:
    """Cumulative pulls reached at each rung of bracket ``s``; the last is always R."""
    return [R // eta ** (s - i) for i in range(s + 1)]


def run_hyperband(
    task: TaskBench,
    arm_sampler: Callable[[int], Sequence[ArmId]],
    store: IncumbentStore | None,
    cfg: SchedulerConfig,
    R: int,
) -> HyperbandResult:
    """Hyperband, or HB-RUSH when ``store`` holds incumbents.

    Each bracket is an independent training run recorded as its own ledger
    segment. Incumbents join every bracket's arm set.
    """
    store = store or IncumbentStore()
    present, skipped = _split_incumbents(task, store)
    inc = set(present)
    ledger = PullLedger()
    trace: list[RungRecord] = []
    outcomes: list[BracketOutcome] = []
    brackets = hyperband_brackets(R, cfg.eta)
    s_max = len(brackets) - 1
    for idx, (n_s, r_s) in enumerate(brackets):
        s = s_max - idx
        fresh = _check_arms(task, arm_sampler(n_s))
        arms = sorted(set(fresh) | inc)
        levels = bracket_levels(R, cfg.eta, s)
        increments = [b - a for a, b in zip([0] + levels[:-1], levels)]
        best, loss, rungs = _run_rungs(task, arms, present, increments, cfg.eta, ledger, segment=idx, bracket=idx)
        trace.extend(rungs)
        outcomes.append(BracketOutcome(s, len(arms), r_s, best, loss))
    winner = min(outcomes, key=lambda o: (o.loss, o.selected not in inc, o.selected))
    return HyperbandResult(winner.selected, ledger, tuple(trace), winner.loss, skipped, tuple(outcomes))


def bracket_pull_total(R: int, eta: int, s: int | None = None) -> int:
    """Total pulls one Hyperband bracket spends without incumbents (default: s = s_max)."""
    brackets = hyperband_brackets(R, eta)
    s_max = len(brackets) - 1
    s = s_max if s is None else s
    n, _ = brackets[s_max - s]
    levels = bracket_levels(R, eta, s)
    total, prev = 0, 0
    for i, level in enumerate(levels):
        total += max(1, n // eta**i) * (level - prev)
        prev = level
    return total
