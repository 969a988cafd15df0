"""Losses, metrics and the mini-batch training loop."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .errors import ConfigError, DataError, TrainingDivergedError
from .model import (LeurnConfig, LeurnParams, activate, init_params,
                    param_shapes, sigmoid, softmax, validate_params)
from .numeric import AdamState, adam_step, rng_from_seed

HIGHER_IS_BETTER = {"auroc": True, "accuracy": True, "rmse": False}
DEFAULT_METRIC = {"binary": "auroc", "multiclass": "accuracy", "regression": "rmse"}


@dataclass
class TrainConfig:
    """Optimization settings."""

    lr: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 300
    patience: int = 30
    seed: int = 0
    metric: str | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs > 0 and self.patience > self.max_epochs:
            raise ConfigError(
                f"patience ({self.patience}) must not exceed max_epochs "
                f"({self.max_epochs})")
        if self.metric is not None and self.metric not in HIGHER_IS_BETTER:
            raise ConfigError(f"unknown metric {self.metric!r}")

    def to_dict(self) -> dict:
        return {"lr": self.lr, "batch_size": self.batch_size,
                "max_epochs": self.max_epochs, "patience": self.patience,
                "seed": self.seed, "metric": self.metric}


@dataclass
class TrainReport:
    """Training history and the best-epoch summary."""

    train_losses: list[float] = field(default_factory=list)
    val_metrics: list[float] = field(default_factory=list)
    metric_name: str = ""
    best_epoch: int | None = None
    best_metric: float | None = None
    epochs_run: int = 0
    backend: str = ""
    wall_time_s: float = 0.0

    def deterministic_fields(self) -> dict:
        """Everything except wall time, for reproducibility comparisons."""
        return {"train_losses": self.train_losses, "val_metrics": self.val_metrics,
                "metric_name": self.metric_name, "best_epoch": self.best_epoch,
                "best_metric": self.best_metric, "epochs_run": self.epochs_run}


# ---------------------------------------------------------------------------
# losses

def loss_and_grad(logits: np.ndarray, y: np.ndarray, task: str):
    """Mean loss over the batch and d(mean loss)/d(logits)."""
    logits = np.asarray(logits, dtype=np.float64)
    B = logits.shape[0]
    if task == "binary":
        z = logits[:, 0]
        yv = np.asarray(y, dtype=np.float64)
        losses = np.maximum(z, 0.0) - z * yv + np.log1p(np.exp(-np.abs(z)))
        dz = (sigmoid(z) - yv) / B
        return float(losses.mean()), dz[:, None]
    if task == "multiclass":
        yi = np.asarray(y, dtype=np.int64)
        shifted = logits - logits.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
        losses = logsumexp - logits[np.arange(B), yi]
        d = softmax(logits)
        d[np.arange(B), yi] -= 1.0
        return float(losses.mean()), d / B
    if task == "regression":
        z = logits[:, 0]
        yv = np.asarray(y, dtype=np.float64)
        diff = z - yv
        return float((diff * diff).mean()), (2.0 * diff / B)[:, None]
    raise ConfigError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# metrics

def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve by average ranks; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DataError(f"auroc length mismatch: {scores.shape} vs {labels.shape}")
    if scores.size == 0:
        raise DataError("auroc needs at least one sample")
    if not set(np.unique(labels)) <= {0, 1}:
        raise DataError("auroc labels must be 0 or 1")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("auroc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranked = scores[order]
    changed = np.r_[True, ranked[1:] != ranked[:-1]]
    group = np.cumsum(changed) - 1
    counts = np.bincount(group)
    ends = np.cumsum(counts)
    avg_rank = ends - (counts - 1) / 2.0
    ranks = np.empty(scores.size)
    ranks[order] = avg_rank[group]
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted = np.asarray(predicted).ravel()
    labels = np.asarray(labels).ravel()
    if predicted.shape != labels.shape:
        raise DataError(f"accuracy length mismatch: {predicted.shape} vs {labels.shape}")
    if predicted.size == 0:
        raise DataError("accuracy needs at least one sample")
    return float((predicted == labels).mean())


def rmse(predicted: np.ndarray, targets: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if predicted.shape != targets.shape:
        raise DataError(f"rmse length mismatch: {predicted.shape} vs {targets.shape}")
    if predicted.size == 0:
        raise DataError("rmse needs at least one sample")
    diff = predicted - targets
    return float(math.sqrt(float((diff * diff).mean())))


# ---------------------------------------------------------------------------
# parameter packing

def pack_params(params: LeurnParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in params.arrays()])


def unpack_views(vec: np.ndarray, cfg: LeurnConfig) -> LeurnParams:
    """LeurnParams whose arrays are views into `vec`; writes to vec show through."""
    shapes = param_shapes(cfg)
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = vec[pos: pos + size].reshape(shape)
        pos += size
        return out

    tau0 = take(shapes["tau0"])
    rule_ws, rule_bs = [], []
    for j in range(cfg.depth):
        rule_ws.append(take(shapes["rule_weights"][j]))
        rule_bs.append(take(shapes["rule_biases"][j]))
    head_w = take(shapes["head_weight"])
    head_b = take(shapes["head_bias"])
    return LeurnParams(tau0, rule_ws, rule_bs, head_w, head_b)


def _flatten_grads(grads_tuple) -> np.ndarray:
    d_tau0, d_ws, d_bs, d_hw, d_hb = grads_tuple
    parts = [d_tau0.ravel()]
    for w, b in zip(d_ws, d_bs):
        parts.extend([w.ravel(), b.ravel()])
    parts.extend([d_hw.ravel(), d_hb.ravel()])
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# batch prediction / evaluation

_EVAL_CHUNK = 8192


def predict_batch(params: LeurnParams, cfg: LeurnConfig, X: np.ndarray,
                  backend=None) -> np.ndarray:
    """Evaluation-mode activated outputs, shape (B, output_dim)."""
    be = kernel.get_backend(None) if backend is None else backend
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cfg.n_features:
        raise DataError(f"X shape {X.shape}, expected (B, {cfg.n_features})")
    outs = []
    for start in range(0, X.shape[0], _EVAL_CHUNK):
        chunk = X[start: start + _EVAL_CHUNK]
        logits, _ = be.batch_forward(chunk, params.tau0, params.rule_weights,
                                     params.rule_biases, params.head_weight,
                                     params.head_bias, cfg.regions, False, None)
        outs.append(activate(logits, cfg))
    return np.concatenate(outs, axis=0)


def evaluate(params: LeurnParams, cfg: LeurnConfig, X: np.ndarray, y: np.ndarray,
             metric: str | None = None, backend=None) -> float:
    """Score params on a dataset with the task metric."""
    metric = metric or DEFAULT_METRIC[cfg.task]
    out = predict_batch(params, cfg, X, backend=backend)
    if metric == "auroc":
        if cfg.task != "binary":
            raise ConfigError("auroc is only defined for binary tasks")
        return auroc(out[:, 0], y)
    if metric == "accuracy":
        if cfg.task == "binary":
            pred = (out[:, 0] >= 0.5).astype(np.int64)
        elif cfg.task == "multiclass":
            pred = out.argmax(axis=1)
        else:
            raise ConfigError("accuracy is not defined for regression")
        return accuracy(pred, y)
    if metric == "rmse":
        return rmse(out[:, 0], y)
    raise ConfigError(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# training loop

def _check_training_data(cfg: LeurnConfig, X, y, name):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cfg.n_features:
        raise DataError(f"{name} X shape {X.shape}, expected (*, {cfg.n_features})")
    if X.shape[0] == 0:
        raise DataError(f"{name} split is empty")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} X contains non-finite values")
    if cfg.task == "regression":
        y = np.asarray(y, dtype=np.float64).ravel()
        if not np.all(np.isfinite(y)):
            raise DataError(f"{name} targets contain non-finite values")
    else:
        y = np.asarray(y).ravel().astype(np.int64)
        hi = 2 if cfg.task == "binary" else cfg.n_classes
        if y.size and (y.min() < 0 or y.max() >= hi):
            raise DataError(f"{name} labels must lie in [0, {hi - 1}]")
    if y.shape[0] != X.shape[0]:
        raise DataError(f"{name} has {X.shape[0]} rows but {y.shape[0]} targets")
    return X, y


def _make_batch_masks(cfg: LeurnConfig, B: int, rng: np.random.Generator):
    if cfg.dropout == 0.0:
        return None
    keep = 1.0 - cfg.dropout
    n = cfg.n_features
    return [(rng.random((B, (j + 1) * n)) < keep) / keep
            for j in range(cfg.depth + 1)]


def fit(cfg: LeurnConfig, tcfg: TrainConfig, train_data, val_data,
        backend=None) -> tuple[LeurnParams, TrainReport]:
    """Train with Adam and early stopping on the validation metric.

    Keeps the parameters of the first epoch that achieved the best
    validation metric.
    """
    t0 = time.perf_counter()
    be = kernel.get_backend(None) if backend is None else backend
    X_tr, y_tr = _check_training_data(cfg, train_data[0], train_data[1], "train")
    X_va, y_va = _check_training_data(cfg, val_data[0], val_data[1], "val")
    metric = tcfg.metric or DEFAULT_METRIC[cfg.task]
    higher = HIGHER_IS_BETTER[metric]

    params0 = init_params(cfg)
    vec = pack_params(params0)
    views = unpack_views(vec, cfg)
    validate_params(views, cfg)
    state = AdamState.for_params(vec.size, lr=tcfg.lr)
    rng = rng_from_seed(tcfg.seed)

    report = TrainReport(metric_name=metric, backend=be.NAME)
    best_vec = vec.copy()
    best_metric = None
    best_epoch = None
    stall = 0
    n_train = X_tr.shape[0]

    for epoch in range(tcfg.max_epochs):
        perm = rng.permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, tcfg.batch_size):
            idx = perm[start: start + tcfg.batch_size]
            Xb = X_tr[idx]
            yb = y_tr[idx]
            masks = _make_batch_masks(cfg, Xb.shape[0], rng)
            logits, cache = be.batch_forward(
                Xb, views.tau0, views.rule_weights, views.rule_biases,
                views.head_weight, views.head_bias, cfg.regions, False, masks)
            loss, dlogits = loss_and_grad(logits, yb, cfg.task)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite training loss at epoch {epoch}")
            grads = be.batch_backward(cache, dlogits)
            vec[:] = adam_step(vec, _flatten_grads(grads), state)
            epoch_loss += loss * idx.size
        report.train_losses.append(epoch_loss / n_train)
        m = evaluate(views, cfg, X_va, y_va, metric=metric, backend=be)
        report.val_metrics.append(m)
        improved = (best_metric is None
                    or (m > best_metric if higher else m < best_metric))
        if improved:
            best_metric = m
            best_epoch = epoch
            best_vec = vec.copy()
            stall = 0
        else:
            stall += 1
            if stall >= tcfg.patience:
                break

    report.best_epoch = best_epoch
    report.best_metric = best_metric
    report.epochs_run = len(report.train_losses)
    report.wall_time_s = time.perf_counter() - t0
    best = unpack_views(best_vec, cfg)
    return best.copy(), report
