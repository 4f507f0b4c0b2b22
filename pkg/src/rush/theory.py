"""Problem quantities of a tabular instance and the RUSH sufficient-budget bound.

For each arm the limit is the final tabulated loss. The envelope is the
tightest non-increasing bound on the distance to that limit, its inverse
counts the pulls needed to get within a given distance, and ``tau`` counts
the pulls after which an arm can no longer out-rank the best arm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from rush.core import ArmId, LossCurve, TaskBench
from rush.errors import TiedBestArm
from rush.schedulers import ceil_log


def envelope(curve: LossCurve | np.ndarray) -> np.ndarray:
    """gamma(t) = max over t' >= t of |loss(t') - limit|, so gamma(T) = 0."""
    losses = curve.losses if isinstance(curve, LossCurve) else np.asarray(curve, dtype=np.float64)
    dist = np.abs(losses - losses[-1])
    return np.maximum.accumulate(dist[::-1])[::-1]


def gamma_inverse(gamma: np.ndarray, alpha: float) -> int:
    """Smallest 1-indexed t with gamma(t) <= alpha."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    hits = np.flatnonzero(np.asarray(gamma) <= alpha)
    if hits.size == 0:
        raise ValueError("envelope never falls to alpha; is gamma(T) = 0?")
    return int(hits[0]) + 1


@dataclass(frozen=True, eq=False)
class TheoryQuantities:
    arms: tuple[ArmId, ...]
    best: ArmId
    nu: dict[ArmId, float]
    delta: dict[ArmId, float]
    gamma_env: dict[ArmId, np.ndarray]
    tau: dict[ArmId, int | None]
    incumbents: tuple[ArmId, ...]
    z: int

    def gamma_bar_inverse(self, alpha: float) -> int:
        return max(gamma_inverse(self.gamma_env[a], alpha) for a in self.arms)


def _first_below(values: np.ndarray, bound: float) -> int | None:
    hits = np.flatnonzero(values < bound)
    return int(hits[0]) + 1 if hits.size else None


def compute_quantities(
    task: TaskBench,
    incumbent_arms: Iterable[ArmId] = (),
    arms: Iterable[ArmId] | None = None,
) -> TheoryQuantities:
    """Quantities over ``arms`` (default: every arm of the task).

    Arms tied with the best have an undefined ``tau`` and do not count
    towards ``z``.
    """
    arm_list = tuple(sorted(arms)) if arms is not None else tuple(task.arm_ids)
    if not arm_list:
        raise ValueError("need at least one arm")
    nu = {a: task.loss_curve(a).limit for a in arm_list}
    best = min(arm_list, key=lambda a: (nu[a], a))
    gamma = {a: envelope(task.loss_curve(a)) for a in arm_list}
    delta = {a: nu[a] - nu[best] for a in arm_list}
    tau: dict[ArmId, int | None] = {}
    for a in arm_list:
        tau[a] = None if delta[a] == 0 else _first_below(gamma[a] + gamma[best], delta[a])
    incumbents = tuple(a for a in incumbent_arms if a in nu)
    z = max((tau[a] for a in incumbents if tau[a] is not None), default=0)
    return TheoryQuantities(arm_list, best, nu, delta, gamma, tau, incumbents, z)


def theorem1_min_budget(q: TheoryQuantities, n: int | None = None, eta: int = 3) -> int:
    """ceil(log_eta n) * max(2n + sum_a gamma_bar_inv(delta_a / 2), z n) + 1."""
    n = len(q.arms) if n is None else n
    others = [a for a in q.arms if a != q.best]
    tied = [a for a in others if q.delta[a] == 0]
    if tied:
        raise TiedBestArm(f"arms {tied} tie with best arm {q.best!r}")
    gap_term = sum(q.gamma_bar_inverse(q.delta[a] / 2) for a in others)
    return ceil_log(n, eta) * max(2 * n + gap_term, q.z * n) + 1

