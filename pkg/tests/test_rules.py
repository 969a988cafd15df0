"""Region extraction, redundancy, replay constancy, and in-region sampling."""
import math

import numpy as np
import pytest

from conftest import hand_model, make_model
from leurn.errors import DataError, ShapeError
from leurn.model import forward, predict
from leurn.rules import Region, extract_region, generate, region_output, simplify


def test_hand_model_region_is_half_line():
    params, cfg = hand_model()
    region, trace = extract_region(params, cfg, np.array([0.5]))
    # tau=0.3, k=2: upper bin starts where tanh(x+0.3)=0, i.e. x=-0.3
    assert region.lower[0] == pytest.approx(-0.3)
    assert region.upper[0] == math.inf
    assert region.bins[0, 0] == 1
    assert len(region.entries) == 1
    e = region.entries[0]
    assert (e.layer, e.feature, e.bin, e.redundant) == (0, 0, 1, False)


def test_region_contains_its_sample():
    rng = np.random.default_rng(0)
    for seed in range(5):
        params, cfg = make_model(n=3, d=2, k=4, seed=seed)
        for _ in range(30):
            x = rng.normal(size=3)
            region, _ = extract_region(params, cfg, x)
            assert np.all(region.lower <= x) and np.all(x < region.upper)


def test_region_output_equals_prediction():
    rng = np.random.default_rng(1)
    for task, n_classes in (("binary", None), ("multiclass", 3)):
        params, cfg = make_model(n=2, d=2, k=5, task=task, n_classes=n_classes, seed=3)
        for _ in range(50):
            x = rng.normal(size=2)
            region, _ = extract_region(params, cfg, x)
            np.testing.assert_array_equal(region_output(params, cfg, region),
                                          predict(params, cfg, x))


def test_prediction_constant_inside_region():
    # Monte Carlo: everything sampled inside the region replays identically
    params, cfg = make_model(n=2, d=2, k=3, seed=7)
    x = np.array([0.4, -0.9])
    region, _ = extract_region(params, cfg, x)
    base = predict(params, cfg, x)
    rng = np.random.default_rng(2)
    lo = np.maximum(region.lower, -3.0)
    hi = np.minimum(region.upper, 3.0)
    for _ in range(1000):
        z = rng.uniform(lo, hi)
        np.testing.assert_array_equal(predict(params, cfg, z), base)


def test_redundant_entries_detected_and_absorbed():
    # deeper layers revisit the same bin with a weaker threshold
    rng = np.random.default_rng(3)
    found_redundant = 0
    for seed in range(12):
        params, cfg = make_model(n=2, d=3, k=2, seed=seed)
        for _ in range(20):
            x = rng.normal(size=2) * 0.5
            region, _ = extract_region(params, cfg, x)
            lower = np.full(2, -math.inf)
            upper = np.full(2, math.inf)
            for e in region.entries:
                f = e.feature
                covers = e.lower <= lower[f] and e.upper >= upper[f]
                assert e.redundant == covers
                if e.redundant:
                    found_redundant += 1
                    assert e.layer > 0
                    assert e.absorbed_by is not None and e.absorbed_by < e.layer
                else:
                    lower[f] = max(lower[f], e.lower)
                    upper[f] = min(upper[f], e.upper)
            np.testing.assert_array_equal(lower, region.lower)
            np.testing.assert_array_equal(upper, region.upper)
    assert found_redundant > 50


def test_simplify_drops_only_redundant():
    params, cfg = make_model(n=2, d=3, k=2, seed=5)
    region, _ = extract_region(params, cfg, np.array([0.2, -0.1]))
    slim = simplify(region)
    assert all(not e.redundant for e in slim.entries)
    assert len(slim.entries) == sum(1 for e in region.entries if not e.redundant)
    np.testing.assert_array_equal(slim.lower, region.lower)
    np.testing.assert_array_equal(slim.upper, region.upper)
    np.testing.assert_array_equal(slim.bins, region.bins)


def test_category_bias_flag():
    params, cfg = hand_model()
    # training data entirely inside the rule's interval -> category bias
    dmin, dmax = np.array([0.0]), np.array([1.0])
    region, _ = extract_region(params, cfg, np.array([0.5]),
                               data_bounds=(dmin, dmax))
    assert region.entries[0].category_bias
    # data crossing the threshold -> informative rule
    region2, _ = extract_region(params, cfg, np.array([0.5]),
                                data_bounds=(np.array([-1.0]), np.array([1.0])))
    assert not region2.entries[0].category_bias


def test_raw_bounds_use_stats():
    params, cfg = hand_model()
    mu, sigma = np.array([10.0]), np.array([2.0])
    region, _ = extract_region(params, cfg, np.array([0.5]), stats=(mu, sigma))
    assert region.raw_lower[0] == pytest.approx(10.0 + 2.0 * -0.3)
    assert region.raw_upper[0] == math.inf
    np.testing.assert_allclose(region.lower, [-0.3], atol=1e-12)


def test_region_output_shape_check():
    params, cfg = make_model(n=2, d=1, k=3)
    region, _ = extract_region(params, cfg, np.zeros(2))
    bad = Region(lower=region.lower, upper=region.upper,
                 raw_lower=region.raw_lower, raw_upper=region.raw_upper,
                 bins=region.bins[:1], entries=region.entries)
    with pytest.raises(ShapeError):
        region_output(params, cfg, bad)


def test_generate_stays_in_region_and_replays():
    params, cfg = make_model(n=2, d=2, k=3, seed=9)
    x = np.array([0.3, -0.4])
    mu = np.array([1.0, -2.0])
    sigma = np.array([0.5, 2.0])
    raw_min = mu + sigma * np.array([-3.0, -3.0])
    raw_max = mu + sigma * np.array([3.0, 3.0])
    region, _ = extract_region(params, cfg, x, stats=(mu, sigma))
    base = predict(params, cfg, x)
    rng = np.random.default_rng(4)
    for _ in range(200):
        raw = generate(region, rng, (raw_min, raw_max))
        assert np.all(raw >= raw_min) and np.all(raw <= raw_max)
        z = (raw - mu) / sigma
        assert np.all(region.lower <= z) and np.all(z < region.upper)
        np.testing.assert_array_equal(predict(params, cfg, z), base)


def test_generate_empty_intersection_raises():
    params, cfg = hand_model()
    region, _ = extract_region(params, cfg, np.array([0.5]))
    # region is [-0.3, inf); data bounds end below it
    with pytest.raises(DataError, match="feature 0"):
        generate(region, np.random.default_rng(0),
                 (np.array([-2.0]), np.array([-1.0])))


def test_generate_bounds_shape_check():
    params, cfg = make_model(n=2, d=0, k=2)
    region, _ = extract_region(params, cfg, np.zeros(2))
    with pytest.raises(ShapeError):
        generate(region, np.random.default_rng(0),
                 (np.zeros(3), np.ones(3)))
