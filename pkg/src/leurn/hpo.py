"""Sequential hyperparameter search (depth, then quantization, then dropout)
and the repeated fresh-split evaluation protocol."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import (DEFAULT_RATIOS, TEST, PreparedData, TabularData,
                   fit_transform, split)
from .errors import ConfigError, TrainingDivergedError
from .model import LeurnConfig
from .numeric import derive_seeds
from .train import DEFAULT_METRIC, HIGHER_IS_BETTER, TrainConfig, evaluate, fit


@dataclass
class SearchSpec:
    """Grids and budgets for the sequential search."""

    depth_grid: tuple = (0, 1, 2, 5, 10)
    k_grid: tuple = (2, 5, 10)
    r_grid: tuple = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)
    trainings_per_config: int = 5
    final_runs: int = 20
    seed: int = 0

    def __post_init__(self):
        if any(k < 2 for k in self.k_grid):
            warnings.warn("k grid values below 2 are mapped to 2")
            mapped = sorted({max(2, int(k)) for k in self.k_grid})
            self.k_grid = tuple(mapped)
        for name, grid in (("depth_grid", self.depth_grid),
                           ("k_grid", self.k_grid), ("r_grid", self.r_grid)):
            if len(grid) == 0:
                raise ConfigError(f"{name} must be non-empty")
            if list(grid) != sorted(grid):
                raise ConfigError(f"{name} must be sorted ascending, got {grid}")
        if self.trainings_per_config < 1:
            raise ConfigError("trainings_per_config must be >= 1")
        if self.final_runs < 1:
            raise ConfigError("final_runs must be >= 1")

    def to_dict(self) -> dict:
        return {"depth_grid": list(self.depth_grid), "k_grid": list(self.k_grid),
                "r_grid": list(self.r_grid),
                "trainings_per_config": self.trainings_per_config,
                "final_runs": self.final_runs, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpec":
        out = cls()
        known = out.to_dict()
        for key, val in d.items():
            if key not in known:
                raise ConfigError(f"unknown search spec field {key!r}")
            if key.endswith("_grid"):
                val = tuple(val)
            setattr(out, key, val)
        out.__post_init__()
        return out


@dataclass
class SearchResult:
    """Chosen config plus everything needed to recompute the choice."""

    best: tuple[int, int, float]
    metric_name: str
    configs: list[dict] = field(default_factory=list)
    trajectory: list[dict] = field(default_factory=list)
    final: dict | None = None

    def to_dict(self) -> dict:
        return {"format_version": 1,
                "best": {"depth": self.best[0], "k": self.best[1],
                         "r": self.best[2]},
                "metric": self.metric_name, "configs": self.configs,
                "trajectory": self.trajectory, "final": self.final}


@dataclass
class FinalResult:
    """Aggregate of the repeated fresh-split protocol."""

    mean: float
    std: float
    per_run: list[float]
    metric_name: str
    models: list = field(default_factory=list)   # (config, params) per run

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "per_run": self.per_run,
                "metric": self.metric_name}


def _build_config(prep: PreparedData, d: int, k: int, r: float,
                  task: str, n_classes: int | None, seed: int) -> LeurnConfig:
    return LeurnConfig(n_features=prep.pre.n_features, depth=d, regions=k,
                       dropout=r, task=task,
                       n_classes=n_classes if task == "multiclass" else None,
                       seed=seed)


def _single_training(work: TabularData, sub_ratios, labels, d: int, k: int,
                     r: float, seeds: list[int], tcfg: TrainConfig,
                     n_classes: int | None) -> float:
    """One search-time training on a fresh train/val split; returns best metric."""
    s_split, s_init, s_train = seeds
    assignment = split(work.n_rows, sub_ratios, s_split, labels)
    prep = fit_transform(work, assignment)
    cfg = _build_config(prep, d, k, r, work.task, n_classes, s_init)
    tc = replace(tcfg, seed=s_train)
    _, rep = fit(cfg, tc, prep.train, prep.val)
    return float(rep.best_metric)


def search(data: TabularData, spec: SearchSpec,
           tcfg: TrainConfig | None = None,
           ratios: tuple[float, float, float] = DEFAULT_RATIOS) -> SearchResult:
    """Three-phase sweep; each phase stops at the first non-improvement.

    Phase 1 sweeps depth ascending at the smallest k and largest dropout;
    phase 2 sweeps k ascending at the chosen depth; phase 3 sweeps dropout
    descending. Every configuration is scored by the mean best-validation
    metric over fresh train/val splits of the non-test rows; the test rows
    from a master split never participate.
    """
    tcfg = tcfg or TrainConfig()
    metric_name = tcfg.metric or DEFAULT_METRIC[data.task]
    higher = HIGHER_IS_BETTER[metric_name]
    worst = -math.inf if higher else math.inf
    labels_full = data.class_labels()
    n_classes = (len(data.schema.target_levels)
                 if data.task == "multiclass" else None)

    test_seed = derive_seeds((spec.seed, 0), 1)[0]
    master = split(data.n_rows, ratios, test_seed, labels_full)
    work_rows = np.flatnonzero(master != TEST)
    work = data.take(work_rows)
    labels = work.class_labels()
    denom = ratios[0] + ratios[1]
    sub_ratios = (ratios[0] / denom, ratios[1] / denom, 0.0)

    result = SearchResult(best=(0, 0, 0.0), metric_name=metric_name)

    def eval_config(phase: str, d: int, k: int, r: float) -> float:
        metrics = []
        failed = False
        for run in range(spec.trainings_per_config):
            seeds = derive_seeds(
                (spec.seed, 1, d, k, int(round(r * 100)), run), 3)
            row = {"phase": phase, "depth": d, "k": k, "r": r, "run": run,
                   "split_seed": seeds[0], "init_seed": seeds[1],
                   "train_seed": seeds[2]}
            try:
                m = _single_training(work, sub_ratios, labels, d, k, r,
                                     seeds, tcfg, n_classes)
                row["metric"] = m
                row["diverged"] = False
                metrics.append(m)
            except TrainingDivergedError as e:
                row["metric"] = None
                row["diverged"] = True
                warnings.warn(f"config d={d} k={k} r={r} run {run} diverged: {e}")
                failed = True
            result.trajectory.append(row)
        mean = worst if failed else float(np.mean(metrics))
        result.configs.append({"phase": phase, "depth": d, "k": k, "r": r,
                               "mean_metric": None if failed else mean,
                               "metrics": [m for m in metrics],
                               "failed": failed})
        return mean

    def better(a: float, b: float) -> bool:
        return a > b if higher else a < b

    def sweep(phase: str, values, to_cfg):
        best_v = None
        best_choice = None
        for v in values:
            d, k, r = to_cfg(v)
            mean = eval_config(phase, d, k, r)
            if best_v is None or better(mean, best_v):
                best_v = mean
                best_choice = v
            else:
                break
        return best_choice

    k0 = spec.k_grid[0]
    r_max = spec.r_grid[-1]
    d_best = sweep("depth", spec.depth_grid, lambda d: (d, k0, r_max))
    k_best = sweep("k", spec.k_grid, lambda k: (d_best, k, r_max))
    r_best = sweep("r", tuple(reversed(spec.r_grid)),
                   lambda r: (d_best, k_best, r))
    result.best = (int(d_best), int(k_best), float(r_best))
    return result


def final_protocol(data: TabularData, config: tuple[int, int, float],
                   runs: int = 20, tcfg: TrainConfig | None = None,
                   seed: int = 0,
                   ratios: tuple[float, float, float] = DEFAULT_RATIOS
                   ) -> FinalResult:
    """Repeatedly re-split, retrain and score on test; report mean and std."""
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    tcfg = tcfg or TrainConfig()
    d, k, r = config
    metric_name = tcfg.metric or DEFAULT_METRIC[data.task]
    labels = data.class_labels()
    n_classes = (len(data.schema.target_levels)
                 if data.task == "multiclass" else None)
    per_run = []
    models = []
    for run in range(runs):
        seeds = derive_seeds((seed, 2, d, k, int(round(r * 100)), run), 3)
        assignment = split(data.n_rows, ratios, seeds[0], labels)
        prep = fit_transform(data, assignment)
        cfg = _build_config(prep, d, k, r, data.task, n_classes, seeds[1])
        tc = replace(tcfg, seed=seeds[2])
        params, _ = fit(cfg, tc, prep.train, prep.val)
        X_te, y_te = prep.test
        m = evaluate(params, cfg, X_te, y_te, metric=metric_name)
        per_run.append(float(m))
        models.append((cfg, params))
    return FinalResult(mean=float(np.mean(per_run)), std=float(np.std(per_run)),
                       per_run=per_run, metric_name=metric_name, models=models)
