"""Embedding extraction, RBF similarity and nearest-neighbor confidence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .errors import ConfigError, DataError, ShapeError
from .model import LeurnConfig, LeurnParams, forward


@dataclass
class EmbeddingIndex:
    """Training-set embeddings plus the RBF bandwidth used for queries."""

    embeddings: np.ndarray
    gamma: float

    def __post_init__(self):
        if self.embeddings.ndim != 2:
            raise ShapeError(f"index must be 2-D, got shape {self.embeddings.shape}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")


def embed(params: LeurnParams, cfg: LeurnConfig, x_std: np.ndarray) -> np.ndarray:
    """Concatenated embeddings of all layers for one sample."""
    return forward(params, cfg, x_std).e_cat.copy()


def embed_batch(params: LeurnParams, cfg: LeurnConfig, X: np.ndarray,
                backend=None) -> np.ndarray:
    """Embeddings for every row of X, shape (B, (depth+1)*n)."""
    be = kernel.get_backend(None) if backend is None else backend
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cfg.n_features:
        raise DataError(f"X shape {X.shape}, expected (*, {cfg.n_features})")
    _, cache = be.batch_forward(X, params.tau0, params.rule_weights,
                                params.rule_biases, params.head_weight,
                                params.head_bias, cfg.regions, False, None)
    return cache[0]


def default_gamma(cfg: LeurnConfig) -> float:
    return 1.0 / ((cfg.depth + 1) * cfg.n_features)


def build_index(params: LeurnParams, cfg: LeurnConfig, X_std: np.ndarray,
                gamma: float | None = None, backend=None) -> EmbeddingIndex:
    """Embedding index over a training set; bandwidth defaults to 1/length."""
    emb = embed_batch(params, cfg, X_std, backend=backend)
    return EmbeddingIndex(embeddings=emb,
                          gamma=default_gamma(cfg) if gamma is None else gamma)


def rbf_similarity(a: np.ndarray, b: np.ndarray, gamma: float) -> float:
    """exp(-gamma * squared distance); 1 at equality, decreasing with distance."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"embedding length mismatch: {a.shape} vs {b.shape}")
    if gamma <= 0:
        raise ConfigError(f"gamma must be > 0, got {gamma}")
    diff = a - b
    return float(np.exp(-gamma * float(diff @ diff)))


def _min_sq_dist(index: EmbeddingIndex, q: np.ndarray) -> float:
    # exact elementwise differences so an indexed duplicate gives exactly 0
    diffs = index.embeddings - q[None, :]
    return float(np.einsum("ij,ij->i", diffs, diffs).min())


def confidence(params: LeurnParams, cfg: LeurnConfig, index: EmbeddingIndex,
               x_std: np.ndarray) -> float:
    """Similarity to the nearest indexed training embedding."""
    if index.embeddings.shape[0] == 0:
        raise DataError("confidence needs a non-empty embedding index")
    q = embed(params, cfg, x_std)
    if q.shape[0] != index.embeddings.shape[1]:
        raise ShapeError(f"query embedding length {q.shape[0]} vs index width "
                         f"{index.embeddings.shape[1]}")
    return float(np.exp(-index.gamma * _min_sq_dist(index, q)))


def confidence_batch(params: LeurnParams, cfg: LeurnConfig, index: EmbeddingIndex,
                     X: np.ndarray, backend=None) -> np.ndarray:
    """Confidence for every row of X against the index."""
    if index.embeddings.shape[0] == 0:
        raise DataError("confidence needs a non-empty embedding index")
    Q = embed_batch(params, cfg, X, backend=backend)
    if Q.shape[1] != index.embeddings.shape[1]:
        raise ShapeError(f"query embedding length {Q.shape[1]} vs index width "
                         f"{index.embeddings.shape[1]}")
    out = np.empty(Q.shape[0])
    for i in range(Q.shape[0]):
        out[i] = np.exp(-index.gamma * _min_sq_dist(index, Q[i]))
    return out
