"""Embedding extraction, RBF similarity, and nearest-neighbor confidence."""
import numpy as np
import pytest

from conftest import make_model
from leurn.errors import DataError, ShapeError
from leurn.model import forward
from leurn.similarity import (EmbeddingIndex, build_index, confidence,
                              confidence_batch, default_gamma, embed,
                              embed_batch, rbf_similarity)


def test_embed_matches_forward_trace():
    params, cfg = make_model(n=3, d=2, k=4, seed=0)
    x = np.array([0.2, -0.5, 1.1])
    np.testing.assert_array_equal(embed(params, cfg, x),
                                  forward(params, cfg, x).e_cat)


def test_embed_batch_matches_per_sample():
    params, cfg = make_model(n=2, d=1, k=3, seed=1)
    X = np.random.default_rng(2).normal(size=(25, 2))
    E = embed_batch(params, cfg, X)
    assert E.shape == (25, (cfg.depth + 1) * cfg.n_features)
    for i in range(25):
        np.testing.assert_allclose(E[i], embed(params, cfg, X[i]), atol=1e-12)


def test_rbf_similarity_formula():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal(size=6)
        b = rng.normal(size=6)
        g = float(rng.uniform(0.1, 2.0))
        ref = np.exp(-g * np.sum((a - b) ** 2))
        assert rbf_similarity(a, b, g) == pytest.approx(ref, rel=1e-12)
    assert rbf_similarity(a, a, g) == 1.0


def test_rbf_similarity_validation():
    with pytest.raises(ShapeError):
        rbf_similarity(np.zeros(3), np.zeros(4), 1.0)
    with pytest.raises(Exception):
        rbf_similarity(np.zeros(3), np.zeros(3), 0.0)


def test_default_gamma_is_inverse_width():
    _, cfg = make_model(n=3, d=2, k=4)
    assert default_gamma(cfg) == pytest.approx(1.0 / 9.0)


def test_build_index_shape_and_gamma():
    params, cfg = make_model(n=2, d=2, k=3, seed=4)
    X = np.random.default_rng(5).normal(size=(30, 2))
    idx = build_index(params, cfg, X)
    assert idx.embeddings.shape == (30, 6)
    assert idx.gamma == pytest.approx(default_gamma(cfg))
    idx2 = build_index(params, cfg, X, gamma=0.5)
    assert idx2.gamma == 0.5


def test_embedding_index_validation():
    with pytest.raises(ShapeError):
        EmbeddingIndex(embeddings=np.zeros(5), gamma=1.0)
    with pytest.raises(Exception):
        EmbeddingIndex(embeddings=np.zeros((5, 2)), gamma=-1.0)


def test_self_confidence_is_exactly_one():
    params, cfg = make_model(n=2, d=2, k=3, seed=6)
    X = np.random.default_rng(7).normal(size=(40, 2))
    idx = build_index(params, cfg, X)
    for i in range(0, 40, 5):
        assert confidence(params, cfg, idx, X[i]) == 1.0
    conf = confidence_batch(params, cfg, idx, X)
    assert np.all(conf == 1.0)


def test_confidence_batch_matches_single():
    params, cfg = make_model(n=2, d=1, k=4, seed=8)
    rng = np.random.default_rng(9)
    idx = build_index(params, cfg, rng.normal(size=(20, 2)))
    Q = rng.normal(size=(15, 2)) * 2
    batch = confidence_batch(params, cfg, idx, Q)
    singles = np.array([confidence(params, cfg, idx, q) for q in Q])
    np.testing.assert_array_equal(batch, singles)
    assert np.all(batch > 0) and np.all(batch <= 1)


def test_confidence_decays_with_distance():
    # an index whose embeddings sit at the origin, probes marching away
    idx = EmbeddingIndex(embeddings=np.zeros((3, 2)), gamma=1.0)
    sims = [float(np.exp(-1.0 * d * d * 2)) for d in (0.0, 1.0, 2.0)]
    for d, ref in zip((0.0, 1.0, 2.0), sims):
        q = np.full(2, d)
        got = max(rbf_similarity(q, e, 1.0) for e in idx.embeddings)
        assert got == pytest.approx(ref, rel=1e-12)
    assert sims[0] > sims[1] > sims[2]


def test_confidence_empty_index_and_width_checks():
    params, cfg = make_model(n=2, d=1, k=3, seed=10)
    with pytest.raises(DataError):
        confidence(params, cfg,
                   EmbeddingIndex(embeddings=np.zeros((0, 4)), gamma=1.0),
                   np.zeros(2))
    wrong = EmbeddingIndex(embeddings=np.zeros((5, 7)), gamma=1.0)
    with pytest.raises(Exception):
        confidence(params, cfg, wrong, np.zeros(2))
