"""Warm-started best-arm identification for hyperparameter search over task sequences."""

from rush.core import CostCurve, LossCurve, PullLedger, TaskBench, pull, rank_by_current_loss, true_best_arm
from rush.errors import (
    BudgetTooSmall,
    FormatError,
    HorizonExceeded,
    InvalidSpec,
    MissingLoss,
    RushError,
    SpecMismatch,
    TiedBestArm,
    UnknownArm,
)
from rush.schedulers import (
    BaiResult,
    HyperbandResult,
    IncumbentStore,
    SchedulerConfig,
    run_hyperband,
    run_rush,
    run_sh,
    update_store,
)

__all__ = [
    "BaiResult",
    "BudgetTooSmall",
    "CostCurve",
    "FormatError",
    "HorizonExceeded",
    "HyperbandResult",
    "IncumbentStore",
    "InvalidSpec",
    "LossCurve",
    "MissingLoss",
    "PullLedger",
    "RushError",
    "SchedulerConfig",
    "SpecMismatch",
    "TaskBench",
    "TiedBestArm",
    "UnknownArm",
    "pull",
    "rank_by_current_loss",
    "run_hyperband",
    "run_rush",
    "run_sh",
    "true_best_arm",
    "update_store",
]
