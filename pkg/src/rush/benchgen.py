"""Synthetic tabular benchmarks with known ground truth, plus the bench file format.

Generation recipe, fixed so families can be regenerated from the seed alone:

* A root ``numpy.random.SeedSequence(seed)`` spawns three children: arm
  traits, per-task limits/noise, and per-task costs. Task ``s`` uses child
  ``s`` of the second and third streams.
* Shared quality ``q_a ~ U(0, 1)`` per arm. Task ``s`` draws independent
  ``e_{s,a} ~ U(0, 1)`` and a level shift ``o_s ~ U(0, task_shift)``, and
  blends ``b_{s,a} = rho * q_a + (1 - rho) * e_{s,a}``. The asymptote is
  ``mu_{s,a} = limit_floor + o_s + limit_spread * b_{s,a}``. With ``rho = 1``
  every task orders arms identically; with ``rho = 0`` orders are independent.
* Arm ``a`` has scale ``c_a = amplitude * (1 + shape_jitter * u)`` and rate
  ``r_a = rate * (1 + shape_jitter * u')`` with ``u, u' ~ U(-1, 1)``.
  Geometric curves are ``mu + c * r**t``; power-law curves are
  ``mu + c * t**(-r)``; t = 1..T.
* Noise ``noise * U(-1, 1) * (T - t) / (T - 1)`` is added, so it is exactly
  zero at t = T. Losses are clipped to [0, 1] and snapped to the 2**-53 grid,
  which makes ``1 - loss`` exact and task inversion an exact involution.
* The limit of an arm is its final loss, by definition.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from rush.core import CostCurve, LossCurve, TaskBench
from rush.errors import FormatError, InvalidSpec, LossOutOfRange

BENCH_VERSION = 1
CURVE_MODELS = ("geometric", "power_law")
COST_KINDS = ("constant", "lognormal", "heavy_tailed")
INVERTED_SUFFIX = "-inv"
_GRID = 2.0**53


@dataclass(frozen=True)
class FamilySpec:
    n_arms: int
    horizon: int
    n_tasks: int
    curve_model: str = "geometric"
    limit_spread: float = 0.4
    relatedness: float = 1.0
    seed: int = 0
    limit_floor: float = 0.05
    task_shift: float = 0.05
    amplitude: float = 0.4
    rate: float = 0.7
    shape_jitter: float = 0.0
    noise: float = 0.0

    def validate(self) -> None:
        if self.n_arms < 2 or self.horizon < 2 or self.n_tasks < 1:
            raise InvalidSpec("need n_arms >= 2, horizon >= 2 and n_tasks >= 1")
        if not 0.0 <= self.relatedness <= 1.0:
            raise InvalidSpec(f"relatedness must lie in [0, 1], got {self.relatedness}")
        if self.curve_model not in CURVE_MODELS:
            raise InvalidSpec(f"curve_model must be one of {CURVE_MODELS}, got {self.curve_model!r}")
        if min(self.limit_spread, self.limit_floor, self.task_shift, self.amplitude, self.noise) < 0:
            raise InvalidSpec("spreads, amplitudes and noise must be non-negative")
        if not 0.0 <= self.shape_jitter < 1.0:
            raise InvalidSpec(f"shape_jitter must lie in [0, 1), got {self.shape_jitter}")
        if self.rate <= 0 or (self.curve_model == "geometric" and self.rate * (1 + self.shape_jitter) >= 1):
            raise InvalidSpec("geometric rates must stay inside (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class CostModel:
    """Per-arm cost of one pull, constant over the arm's curve.

    ``heavy_tailed`` draws a lognormal body and turns ``tail_fraction`` of the
    arms into outliers costing ``location * tail_factor * (1 + Pareto(tail_shape))``.
    Outliers are chosen among the worst ``tail_pool`` fraction of arms of each
    task, so with ``tail_pool < 1`` expensive arms tend to be poor ones.
    """

    kind: str = "constant"
    location: float = 1.0
    scale: float = 0.5
    tail_fraction: float = 0.1
    tail_factor: float = 100.0
    tail_shape: float = 1.0
    tail_pool: float = 1.0

    def validate(self) -> None:
        if self.kind not in COST_KINDS:
            raise InvalidSpec(f"cost kind must be one of {COST_KINDS}, got {self.kind!r}")
        if self.location <= 0 or self.scale < 0:
            raise InvalidSpec("cost location must be positive and scale non-negative")
        if not 0 <= self.tail_fraction <= 1 or not 0 < self.tail_pool <= 1:
            raise InvalidSpec("tail_fraction must lie in [0, 1] and tail_pool in (0, 1]")
        if self.tail_factor <= 0 or self.tail_shape <= 0:
            raise InvalidSpec("tail_factor and tail_shape must be positive")


def arm_ids(n_arms: int) -> list[str]:
    width = len(str(n_arms - 1))
    return [f"cfg{i:0{width}d}" for i in range(n_arms)]


@dataclass(frozen=True, eq=False)
class FamilyParameters:
    """Noise-free curve parameters, indexed [task, arm] or [arm]."""

    asymptote: np.ndarray
    scale: np.ndarray
    rate: np.ndarray
    blend: np.ndarray


def _streams(spec: FamilySpec) -> tuple[np.random.Generator, list[np.random.SeedSequence], list[np.random.SeedSequence]]:
    traits, tasks, costs = np.random.SeedSequence(spec.seed).spawn(3)
    return np.random.default_rng(traits), tasks.spawn(spec.n_tasks), costs.spawn(spec.n_tasks)


def family_parameters(spec: FamilySpec) -> FamilyParameters:
    spec.validate()
    traits, task_seeds, _ = _streams(spec)
    quality = traits.uniform(size=spec.n_arms)
    scale = spec.amplitude * (1 + spec.shape_jitter * traits.uniform(-1, 1, size=spec.n_arms))
    rate = spec.rate * (1 + spec.shape_jitter * traits.uniform(-1, 1, size=spec.n_arms))
    rho = spec.relatedness
    asymptote = np.empty((spec.n_tasks, spec.n_arms))
    blend = np.empty((spec.n_tasks, spec.n_arms))
    for s, seq in enumerate(task_seeds):
        rng = np.random.default_rng(seq)
        own = rng.uniform(size=spec.n_arms)
        shift = rng.uniform(0, spec.task_shift) if spec.task_shift > 0 else 0.0
        blend[s] = rho * quality + (1 - rho) * own
        asymptote[s] = spec.limit_floor + shift + spec.limit_spread * blend[s]
    return FamilyParameters(asymptote, scale, rate, blend)


def _snap(losses: np.ndarray) -> np.ndarray:
    return np.round(np.clip(losses, 0.0, 1.0) * _GRID) / _GRID


def _task_costs(cost: CostModel, blend: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = blend.size
    if cost.kind == "constant":
        return np.full(n, cost.location)
    base = cost.location * np.exp(cost.scale * rng.standard_normal(n))
    if cost.kind == "heavy_tailed" and cost.tail_fraction > 0:
        n_out = max(1, int(round(cost.tail_fraction * n)))
        pool = np.argsort(-blend, kind="stable")[: max(n_out, int(round(cost.tail_pool * n)))]
        chosen = rng.choice(pool, size=n_out, replace=False)
        base[chosen] = cost.location * cost.tail_factor * (1 + rng.pareto(cost.tail_shape, size=n_out))
    return base


def generate_family(spec: FamilySpec, cost: CostModel | None = None) -> list[TaskBench]:
    """``spec.n_tasks`` related tasks over one shared set of arm ids."""
    cost = cost or CostModel()
    cost.validate()
    params = family_parameters(spec)
    _, task_seeds, cost_seeds = _streams(spec)
    ids = arm_ids(spec.n_arms)
    T = spec.horizon
    t = np.arange(1, T + 1, dtype=np.float64)
    if spec.curve_model == "geometric":
        shape = params.scale[:, None] * params.rate[:, None] ** t[None, :]
    else:
        shape = params.scale[:, None] * t[None, :] ** (-params.rate[:, None])
    decay = (T - t) / (T - 1)
    tasks = []
    for s in range(spec.n_tasks):
        losses = params.asymptote[s][:, None] + shape
        if spec.noise > 0:
            rng = np.random.default_rng(task_seeds[s].spawn(1)[0])
            losses = losses + spec.noise * rng.uniform(-1, 1, size=losses.shape) * decay[None, :]
        losses = _snap(losses)
        per_pull = _task_costs(cost, params.blend[s], np.random.default_rng(cost_seeds[s]))
        arms = {
            arm: (LossCurve(losses[i]), CostCurve(np.full(T, per_pull[i])))
            for i, arm in enumerate(ids)
        }
        tasks.append(TaskBench(f"task{s:03d}", arms, T))
    return tasks


def invert_task(task: TaskBench) -> TaskBench:
    """Replace every loss by 1 - loss; ``-inv`` is appended to (or stripped from) the id."""
    arms = {}
    for arm, (loss, cost) in task.arms.items():
        values = loss.losses
        if values.min() < 0 or values.max() > 1:
            raise LossOutOfRange(f"task {task.task_id!r}, arm {arm!r}: losses must lie in [0, 1] to invert")
        arms[arm] = (LossCurve(1.0 - values), cost)
    if task.task_id.endswith(INVERTED_SUFFIX):
        task_id = task.task_id[: -len(INVERTED_SUFFIX)]
    else:
        task_id = task.task_id + INVERTED_SUFFIX
    return TaskBench(task_id, arms, task.horizon)


def with_inverted_twins(tasks: Sequence[TaskBench]) -> list[TaskBench]:
    out = []
    for task in tasks:
        out.extend([task, invert_task(task)])
    return out


def bench_to_dict(tasks: Sequence[TaskBench]) -> dict[str, Any]:
    return {
        "version": BENCH_VERSION,
        "tasks": [
            {
                "task_id": task.task_id,
                "horizon": task.horizon,
                "arms": [
                    {"arm_id": arm, "losses": loss.losses.tolist(), "costs": cost.costs.tolist()}
                    for arm, (loss, cost) in task.arms.items()
                ],
            }
            for task in tasks
        ],
    }


def save_bench(tasks: Sequence[TaskBench], path: str | Path) -> None:
    text = json.dumps(bench_to_dict(tasks), allow_nan=False, separators=(",", ":"))
    Path(path).write_text(text + "\n")


def _reject_constant(name: str) -> float:
    raise FormatError(f"non-finite value {name} in bench file")


def _as_float_array(values: Any, where: str, field: str, horizon: int) -> np.ndarray:
    if not isinstance(values, list):
        raise FormatError(f"{where}: {field} must be a list")
    if len(values) != horizon:
        raise FormatError(f"{where}: {field} has length {len(values)}, expected horizon {horizon}")
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {field} must hold numbers") from exc
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{where}: {field} contains non-finite values")
    return arr


def bench_from_dict(doc: Any) -> list[TaskBench]:
    if not isinstance(doc, dict) or doc.get("version") != BENCH_VERSION:
        version = doc.get("version") if isinstance(doc, dict) else None
        raise FormatError(f"unsupported bench version {version!r}; expected {BENCH_VERSION}")
    if not isinstance(doc.get("tasks"), list):
        raise FormatError("bench file needs a 'tasks' list")
    tasks = []
    seen_tasks = set()
    for raw in doc["tasks"]:
        try:
            task_id, horizon, raw_arms = raw["task_id"], raw["horizon"], raw["arms"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"task entry missing field: {exc}") from exc
        if not isinstance(task_id, str) or task_id in seen_tasks:
            raise FormatError(f"task id {task_id!r} is not a unique string")
        seen_tasks.add(task_id)
        if not isinstance(horizon, int) or horizon < 1:
            raise FormatError(f"task {task_id!r}: horizon must be a positive integer")
        if not isinstance(raw_arms, list) or not raw_arms:
            raise FormatError(f"task {task_id!r}: needs a non-empty 'arms' list")
        arms = {}
        for entry in raw_arms:
            try:
                arm = entry["arm_id"]
                where = f"task {task_id!r}, arm {arm!r}"
                losses = _as_float_array(entry["losses"], where, "losses", horizon)
                costs = _as_float_array(entry["costs"], where, "costs", horizon)
            except (KeyError, TypeError) as exc:
                raise FormatError(f"task {task_id!r}: arm entry missing field: {exc}") from exc
            if not isinstance(arm, str) or not arm or arm in arms:
                raise FormatError(f"task {task_id!r}: arm id {arm!r} is not a unique non-empty string")
            if np.any(costs < 0):
                raise FormatError(f"{where}: costs must be non-negative")
            arms[arm] = (LossCurve(losses), CostCurve(costs))
        tasks.append(TaskBench(task_id, arms, horizon))
    return tasks


def load_bench(path: str | Path) -> list[TaskBench]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return bench_from_dict(doc)


def spec_dict(spec: FamilySpec, cost: CostModel) -> dict[str, Any]:
    return {"family": asdict(spec), "cost": asdict(cost)}


def random_instance(rng: np.random.Generator, n_arms: int, settle_max: int = 24, task_id: str = "instance") -> TaskBench:
    """Small random task with a strict best arm and crossing curves.

    Each arm settles exactly on its limit after a random number of pulls, so
    the envelope does not depend on how far the curve is padded later.
    """
    if n_arms < 1 or settle_max < 1:
        raise InvalidSpec("need n_arms >= 1 and settle_max >= 1")
    while True:
        limits = _snap(rng.uniform(0.1, 0.9, size=n_arms))
        if n_arms == 1 or np.sum(limits == limits.min()) == 1:
            break
    t = np.arange(1, settle_max + 1, dtype=np.float64)
    ids = arm_ids(n_arms)
    curves = {}
    for i, arm in enumerate(ids):
        settle = int(rng.integers(1, settle_max + 1))
        frac = np.clip((settle - t) / settle, 0.0, None)
        drift = rng.uniform(-0.3, 0.6) * frac ** rng.uniform(0.5, 3.0)
        wiggle = rng.uniform(0.0, 0.2) * rng.uniform(-1, 1, size=t.size) * frac
        curves[arm] = _snap(limits[i] + drift + wiggle)
        curves[arm][settle - 1 :] = limits[i]
    return TaskBench.from_arrays(task_id, curves)


def pad_task(task: TaskBench, horizon: int) -> TaskBench:
    """Extend every curve to ``horizon`` by repeating its final loss and cost."""
    if horizon <= task.horizon:
        return task
    extra = horizon - task.horizon
    arms = {}
    for arm, (loss, cost) in task.arms.items():
        arms[arm] = (
            LossCurve(np.concatenate([loss.losses, np.full(extra, loss.limit)])),
            CostCurve(np.concatenate([cost.costs, np.full(extra, cost.costs[-1])])),
        )
    return TaskBench(task.task_id, arms, horizon)
