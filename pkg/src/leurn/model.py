"""Network core: quantized-tanh rule layers over standardized tabular inputs.

Layer i turns each feature into a one-of-k indicator s_i = qtanh(x + tau_i),
embeds it as e_i = s_i * tanh(tau_i), and a fully connected layer over all
embeddings so far produces the next layer's thresholds. A final linear head
maps the concatenated embeddings to the output.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .numeric import rng_from_seed

TASKS = ("binary", "multiclass", "regression")


@dataclass
class LeurnConfig:
    """Architecture and task settings."""

    n_features: int
    depth: int = 2
    regions: int = 5
    dropout: float = 0.0
    task: str = "binary"
    n_classes: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_features < 1:
            raise ConfigError(f"n_features must be >= 1, got {self.n_features}")
        if self.depth < 0:
            raise ConfigError(f"depth must be >= 0, got {self.depth}")
        if self.regions < 1:
            raise ConfigError(f"regions must be >= 1, got {self.regions}")
        if self.regions == 1:
            warnings.warn("regions=1 has a single constant bin; using regions=2")
            self.regions = 2
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.task == "multiclass":
            if self.n_classes is None or self.n_classes < 2:
                raise ConfigError("multiclass task needs n_classes >= 2")
        elif self.n_classes not in (None, 2):
            raise ConfigError(f"n_classes is only used for multiclass, got {self.n_classes}")

    @property
    def output_dim(self) -> int:
        return self.n_classes if self.task == "multiclass" else 1

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features, "depth": self.depth,
            "regions": self.regions, "dropout": self.dropout, "task": self.task,
            "n_classes": self.n_classes, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LeurnConfig":
        return cls(**d)


@dataclass
class LeurnParams:
    """Learnable parameters.

    rule_weights[j] has shape ((j+1)*n, n) and maps the concatenation of
    embeddings 0..j to the thresholds of layer j+1. The head maps all
    depth+1 embeddings to the output.
    """

    tau0: np.ndarray
    rule_weights: list[np.ndarray] = field(default_factory=list)
    rule_biases: list[np.ndarray] = field(default_factory=list)
    head_weight: np.ndarray = None
    head_bias: np.ndarray = None

    def copy(self) -> "LeurnParams":
        return LeurnParams(
            tau0=self.tau0.copy(),
            rule_weights=[w.copy() for w in self.rule_weights],
            rule_biases=[b.copy() for b in self.rule_biases],
            head_weight=self.head_weight.copy(),
            head_bias=self.head_bias.copy(),
        )

    def arrays(self) -> list[np.ndarray]:
        out = [self.tau0]
        for w, b in zip(self.rule_weights, self.rule_biases):
            out.extend([w, b])
        out.extend([self.head_weight, self.head_bias])
        return out


@dataclass
class LeurnGrads:
    """Gradients with the same structure as LeurnParams."""

    tau0: np.ndarray
    rule_weights: list[np.ndarray]
    rule_biases: list[np.ndarray]
    head_weight: np.ndarray
    head_bias: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out = [self.tau0]
        for w, b in zip(self.rule_weights, self.rule_biases):
            out.extend([w, b])
        out.extend([self.head_weight, self.head_bias])
        return out


@dataclass
class ForwardTrace:
    """Everything one forward pass computed, layer by layer."""

    taus: list[np.ndarray]
    bins: np.ndarray            # (depth+1, n) int64
    indicators: list[np.ndarray]
    embeddings: list[np.ndarray]
    e_cat: np.ndarray
    logits: np.ndarray
    tanh_z: list[np.ndarray]    # tanh of the pre-quantization inputs
    masks: list[np.ndarray] | None = None
    surrogate: bool = False


def param_shapes(cfg: LeurnConfig) -> dict:
    """Expected shape of every parameter array."""
    n = cfg.n_features
    return {
        "tau0": (n,),
        "rule_weights": [((j + 1) * n, n) for j in range(cfg.depth)],
        "rule_biases": [(n,) for _ in range(cfg.depth)],
        "head_weight": ((cfg.depth + 1) * n, cfg.output_dim),
        "head_bias": (cfg.output_dim,),
    }


def init_params(cfg: LeurnConfig, seed: int | None = None) -> LeurnParams:
    """Glorot-uniform weights, zero biases, thresholds uniform in [-0.5, 0.5]."""
    rng = rng_from_seed(cfg.seed if seed is None else seed)
    n = cfg.n_features

    def glorot(fan_in, fan_out):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    tau0 = rng.uniform(-0.5, 0.5, size=n)
    rule_weights, rule_biases = [], []
    for j in range(cfg.depth):
        rule_weights.append(glorot((j + 1) * n, n))
        rule_biases.append(np.zeros(n))
    head_weight = glorot((cfg.depth + 1) * n, cfg.output_dim)
    head_bias = np.zeros(cfg.output_dim)
    return LeurnParams(tau0, rule_weights, rule_biases, head_weight, head_bias)


def validate_params(params: LeurnParams, cfg: LeurnConfig) -> None:
    shapes = param_shapes(cfg)
    if params.tau0.shape != shapes["tau0"]:
        raise ShapeError(f"tau0 shape {params.tau0.shape}, expected {shapes['tau0']}")
    if len(params.rule_weights) != cfg.depth or len(params.rule_biases) != cfg.depth:
        raise ShapeError(
            f"expected {cfg.depth} rule layers, got {len(params.rule_weights)} weights "
            f"and {len(params.rule_biases)} biases")
    for j, (w, b) in enumerate(zip(params.rule_weights, params.rule_biases)):
        if w.shape != shapes["rule_weights"][j]:
            raise ShapeError(f"rule_weights[{j}] shape {w.shape}, "
                             f"expected {shapes['rule_weights'][j]}")
        if b.shape != shapes["rule_biases"][j]:
            raise ShapeError(f"rule_biases[{j}] shape {b.shape}, "
                             f"expected {shapes['rule_biases'][j]}")
    if params.head_weight.shape != shapes["head_weight"]:
        raise ShapeError(f"head_weight shape {params.head_weight.shape}, "
                         f"expected {shapes['head_weight']}")
    if params.head_bias.shape != shapes["head_bias"]:
        raise ShapeError(f"head_bias shape {params.head_bias.shape}, "
                         f"expected {shapes['head_bias']}")


# ---------------------------------------------------------------------------
# quantized tanh

def qtanh(z: float, k: int) -> float:
    """Quantize tanh(z) onto the midpoint of one of k equal bins of [-1, 1].

    Bin j covers [-1 + 2j/k, -1 + 2(j+1)/k); a value on a boundary belongs
    to the upper bin. Returns the midpoint -1 + (2j+1)/k.
    """
    if k < 2:
        raise ConfigError(f"qtanh needs k >= 2, got {k}")
    t = math.tanh(z)
    j = int(math.floor((t + 1.0) * k / 2.0))
    j = min(max(j, 0), k - 1)
    return -1.0 + (2.0 * j + 1.0) / k


def qtanh_bins(t: np.ndarray, k: int) -> np.ndarray:
    """Bin indices for already-squashed values t = tanh(z)."""
    j = np.floor((t + 1.0) * (k / 2.0)).astype(np.int64)
    return np.clip(j, 0, k - 1)


def bin_midpoints(bins: np.ndarray, k: int) -> np.ndarray:
    """Quantized indicator value for each bin index."""
    return -1.0 + (2.0 * bins + 1.0) / k


def bin_edge(j: int, k: int) -> float:
    """Lower edge of bin j in tanh space; -1 for j=0, +1 for j=k."""
    return -1.0 + 2.0 * j / k


# ---------------------------------------------------------------------------
# forward / backward

def _make_masks(cfg: LeurnConfig, rng: np.random.Generator) -> list[np.ndarray] | None:
    if cfg.dropout == 0.0:
        return None
    keep = 1.0 - cfg.dropout
    n = cfg.n_features
    masks = []
    for j in range(cfg.depth + 1):
        width = (j + 1) * n
        masks.append((rng.random(width) < keep) / keep)
    return masks


def _run(params: LeurnParams, cfg: LeurnConfig, x: np.ndarray | None,
         bins: np.ndarray | None, masks: list[np.ndarray] | None,
         surrogate: bool) -> ForwardTrace:
    """Shared recursion for forward-from-input and replay-from-bins.

    When `bins` is given the indicators come straight from those bin indices,
    so two runs that agree on bins produce bitwise-identical embeddings,
    thresholds and logits.
    """
    n = cfg.n_features
    k = cfg.regions
    d = cfg.depth
    e_cat = np.zeros((d + 1) * n)
    taus, indicators, embeddings, tanh_zs = [], [], [], []
    out_bins = np.zeros((d + 1, n), dtype=np.int64)
    tau = params.tau0
    for j in range(d + 1):
        if j > 0:
            src = e_cat[: j * n]
            if masks is not None:
                src = src * masks[j - 1]
            tau = src @ params.rule_weights[j - 1] + params.rule_biases[j - 1]
        taus.append(tau)
        if x is not None:
            tz = np.tanh(x + tau)
            b = qtanh_bins(tz, k)
        else:
            tz = np.full(n, np.nan)
            b = np.asarray(bins[j], dtype=np.int64)
        out_bins[j] = b
        if surrogate:
            s = tz
        else:
            s = bin_midpoints(b, k)
        e = s * np.tanh(tau)
        indicators.append(s)
        embeddings.append(e)
        tanh_zs.append(tz)
        e_cat[j * n: (j + 1) * n] = e
    head_in = e_cat if masks is None else e_cat * masks[d]
    logits = head_in @ params.head_weight + params.head_bias
    return ForwardTrace(taus=taus, bins=out_bins, indicators=indicators,
                        embeddings=embeddings, e_cat=e_cat, logits=logits,
                        tanh_z=tanh_zs, masks=masks, surrogate=surrogate)


def forward(params: LeurnParams, cfg: LeurnConfig, x: np.ndarray,
            train: bool = False, rng: np.random.Generator | None = None,
            surrogate: bool = False) -> ForwardTrace:
    """Run one sample through the network and keep the full trace."""
    validate_params(params, cfg)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cfg.n_features,):
        raise ShapeError(f"input shape {x.shape}, expected ({cfg.n_features},)")
    if not np.all(np.isfinite(x)):
        raise DataError("input contains non-finite values")
    masks = None
    if train and cfg.dropout > 0.0:
        if rng is None:
            raise ConfigError("training-mode forward with dropout needs an rng")
        masks = _make_masks(cfg, rng)
    return _run(params, cfg, x, None, masks, surrogate)


def replay_from_bins(params: LeurnParams, cfg: LeurnConfig,
                     bins: np.ndarray) -> ForwardTrace:
    """Recompute the whole network from stored bin indices alone."""
    validate_params(params, cfg)
    bins = np.asarray(bins)
    if bins.shape != (cfg.depth + 1, cfg.n_features):
        raise ShapeError(f"bins shape {bins.shape}, expected "
                         f"({cfg.depth + 1}, {cfg.n_features})")
    if bins.min() < 0 or bins.max() >= cfg.regions:
        raise DataError(f"bin indices must lie in [0, {cfg.regions - 1}]")
    return _run(params, cfg, None, bins, None, False)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def activate(logits: np.ndarray, cfg: LeurnConfig) -> np.ndarray:
    """Apply the task's output activation."""
    if cfg.task == "binary":
        return sigmoid(logits)
    if cfg.task == "multiclass":
        return softmax(logits)
    return np.asarray(logits, dtype=np.float64)


def predict(params: LeurnParams, cfg: LeurnConfig, x: np.ndarray) -> np.ndarray:
    """Evaluation-mode prediction for one sample."""
    return activate(forward(params, cfg, x).logits, cfg)


def backward(params: LeurnParams, cfg: LeurnConfig, trace: ForwardTrace,
             grad_logits: np.ndarray) -> LeurnGrads:
    """Gradients of a scalar loss given d(loss)/d(logits) for one sample.

    The quantizer uses the straight-through estimate ds/dz = 1 - tanh(z)^2;
    in surrogate traces that estimate is the exact derivative.
    """
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if grad_logits.shape != (cfg.output_dim,):
        raise ShapeError(f"grad_logits shape {grad_logits.shape}, "
                         f"expected ({cfg.output_dim},)")
    n = cfg.n_features
    d = cfg.depth
    masks = trace.masks
    head_in = trace.e_cat if masks is None else trace.e_cat * masks[d]
    d_head_w = np.outer(head_in, grad_logits)
    d_head_b = grad_logits.copy()
    g_cat = params.head_weight @ grad_logits
    if masks is not None:
        g_cat = g_cat * masks[d]
    else:
        g_cat = g_cat.copy()
    d_rule_w = [None] * d
    d_rule_b = [None] * d
    for j in range(d, 0, -1):
        de = g_cat[j * n: (j + 1) * n]
        tz = trace.tanh_z[j]
        tt = np.tanh(trace.taus[j])
        ste = 1.0 - tz * tz
        dtau = de * (ste * tt + trace.indicators[j] * (1.0 - tt * tt))
        src = trace.e_cat[: j * n]
        if masks is not None:
            src = src * masks[j - 1]
        d_rule_w[j - 1] = np.outer(src, dtau)
        d_rule_b[j - 1] = dtau
        back = params.rule_weights[j - 1] @ dtau
        if masks is not None:
            back = back * masks[j - 1]
        g_cat[: j * n] += back
    tz0 = trace.tanh_z[0]
    tt0 = np.tanh(trace.taus[0])
    ste0 = 1.0 - tz0 * tz0
    d_tau0 = g_cat[:n] * (ste0 * tt0 + trace.indicators[0] * (1.0 - tt0 * tt0))
    return LeurnGrads(tau0=d_tau0, rule_weights=d_rule_w, rule_biases=d_rule_b,
                      head_weight=d_head_w, head_bias=d_head_b)
