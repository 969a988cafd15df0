"""CSV loading, splits, the one-hot/standardize preprocessor, and toy data."""
import math

import numpy as np
import pytest

from leurn.data import (PreparedData, Preprocessor, TabularData,
                        dataset_from_arrays, fit_transform, half_moon,
                        load_csv, save_csv, split)
from leurn.errors import DataError


def _write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


CSV_MIXED = """age,color,income,label
25,red,50000,yes
30,blue,60000,no
35,red,,yes
40,green,80000,no
,blue,90000,yes
50,red,40000,no
"""


def test_load_csv_types_and_levels(tmp_path):
    td = load_csv(_write(tmp_path, CSV_MIXED), "label")
    kinds = {c.name: c.kind for c in td.schema.columns}
    assert kinds == {"age": "continuous", "color": "categorical",
                     "income": "continuous"}
    color = next(c for c in td.schema.columns if c.name == "color")
    assert color.levels == ["red", "blue", "green"]   # first-appearance order
    assert td.schema.task == "binary"
    assert td.schema.target_levels == ["yes", "no"]
    assert td.n_rows == 6


def test_load_csv_numeric_binary_target(tmp_path):
    text = "x,label\n1.0,0\n2.0,1\n3.0,0\n"
    td = load_csv(_write(tmp_path, text), "label")
    assert td.schema.task == "binary"
    assert td.schema.target_levels == ["0", "1"]


def test_load_csv_numeric_target_regression(tmp_path):
    text = "x,y\n1.0,0.5\n2.0,1.5\n3.0,2.5\n"
    td = load_csv(_write(tmp_path, text), "y")
    assert td.schema.task == "regression"
    assert td.schema.target_levels is None
    np.testing.assert_allclose(td.target, [0.5, 1.5, 2.5])


def test_load_csv_task_override(tmp_path):
    text = "x,y\n1.0,1\n2.0,2\n3.0,3\n4.0,2\n"
    td = load_csv(_write(tmp_path, text), "y", task="multiclass")
    assert td.schema.task == "multiclass"
    assert td.schema.target_levels == ["1", "2", "3"]


def test_load_csv_errors(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_csv(str(tmp_path / "missing.csv"), "y")
    with pytest.raises(DataError, match="empty"):
        load_csv(_write(tmp_path, "", "e.csv"), "y")
    with pytest.raises(DataError, match="target column"):
        load_csv(_write(tmp_path, "a,b\n1,2\n", "t.csv"), "zzz")
    with pytest.raises(DataError, match="cells"):
        load_csv(_write(tmp_path, "a,b\n1,2\n3\n", "r.csv"), "b")
    with pytest.raises(DataError, match="no data rows"):
        load_csv(_write(tmp_path, "a,b\n", "n.csv"), "b")
    with pytest.raises(DataError, match="missing values"):
        load_csv(_write(tmp_path, "a,b\n1,\n2,1\n3,0\n", "m.csv"), "b")
    with pytest.raises(DataError, match="levels"):
        load_csv(_write(tmp_path, "a,b\n1,x\n2,y\n3,z\n", "l.csv"), "b",
                 task="binary")


def test_split_sizes_and_determinism():
    a1 = split(100, (0.6, 0.2, 0.2), seed=5)
    a2 = split(100, (0.6, 0.2, 0.2), seed=5)
    a3 = split(100, (0.6, 0.2, 0.2), seed=6)
    np.testing.assert_array_equal(a1, a2)
    assert not np.array_equal(a1, a3)
    assert (a1 == 0).sum() == 60 and (a1 == 1).sum() == 20 and (a1 == 2).sum() == 20


def test_split_stratified_counts():
    labels = np.array([0] * 40 + [1] * 60)
    a = split(100, (0.5, 0.25, 0.25), seed=0, labels=labels)
    for c, total in ((0, 40), (1, 60)):
        m = labels == c
        assert (a[m] == 0).sum() == total // 2
        assert abs((a[m] == 1).sum() - total / 4) <= 1
        assert abs((a[m] == 2).sum() - total / 4) <= 1


def test_split_validation():
    with pytest.raises(DataError):
        split(2)
    with pytest.raises(DataError):
        split(10, (0.5, 0.2, 0.2))
    with pytest.raises(DataError):
        split(10, (0.7, -0.1, 0.4))
    # a class with one member cannot appear in all three nonzero splits
    labels = np.array([0] * 9 + [1])
    with pytest.raises(DataError, match="absent"):
        split(10, (0.4, 0.3, 0.3), seed=0, labels=labels)


def test_split_zero_ratio_allows_empty():
    labels = np.array([0, 1] * 10)
    a = split(20, (0.8, 0.2, 0.0), seed=1, labels=labels)
    assert (a == 2).sum() == 0


def test_fit_transform_standardizes_everything(tmp_path):
    td = load_csv(_write(tmp_path, CSV_MIXED), "label")
    assignment = np.zeros(6, dtype=np.int64)   # everything is train
    prep = fit_transform(td, assignment)
    X = prep.X
    names = prep.pre.feature_names()
    # continuous sources first (file order), then one-hot blocks
    assert names == ["age", "income", "color=red", "color=blue", "color=green"]
    np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(X.std(axis=0), 1.0, atol=1e-9)
    assert prep.pre.feature_kinds() == ["continuous", "continuous",
                                        "categorical", "categorical",
                                        "categorical"]


def test_fit_transform_imputes_from_train(tmp_path):
    td = load_csv(_write(tmp_path, CSV_MIXED), "label")
    assignment = np.array([0, 0, 0, 0, 1, 2])   # rows 4,5 are val/test
    prep = fit_transform(td, assignment)
    assert prep.pre.impute["age"] == pytest.approx(np.median([25, 30, 35, 40]))
    assert prep.pre.impute["income"] == pytest.approx(np.median([50000, 60000, 80000]))
    assert prep.pre.impute["color"] == "red"   # train mode
    # row 2's missing income was filled with the train median pre-standardization
    mu = prep.pre.out_cols[1].mean
    sd = prep.pre.out_cols[1].std
    assert prep.X[2, 1] == pytest.approx((prep.pre.impute["income"] - mu) / sd)


def test_fit_transform_drops_constant_column():
    X = np.column_stack([np.ones(10), np.arange(10, dtype=np.float64)])
    td = dataset_from_arrays(X, np.array([0, 1] * 5), "binary",
                             feature_names=["const", "ramp"])
    with pytest.warns(UserWarning, match="constant column"):
        prep = fit_transform(td, np.zeros(10, dtype=np.int64))
    assert prep.pre.feature_names() == ["ramp"]


def test_fit_transform_all_constant_raises():
    X = np.ones((6, 1))
    td = dataset_from_arrays(X, np.array([0, 1] * 3), "binary")
    with pytest.warns(UserWarning):
        with pytest.raises(DataError, match="no usable feature"):
            fit_transform(td, np.zeros(6, dtype=np.int64))


def test_unseen_level_warns_and_zeroes(tmp_path):
    text = "c,label\nred,0\nblue,1\nred,0\nblue,1\ngreen,0\n"
    td = load_csv(_write(tmp_path, text), "label")
    assignment = np.array([0, 0, 0, 1, 2])   # green appears only in test
    with pytest.warns(UserWarning, match="unseen"):
        prep = fit_transform(td, assignment)
    # the unseen level encodes as zero in every indicator, pre-standardization
    mu, sd = prep.pre.stats()
    np.testing.assert_allclose(prep.X[4] * sd + mu, 0.0, atol=1e-12)


def test_transform_row_matches_transform(tmp_path):
    td = load_csv(_write(tmp_path, CSV_MIXED), "label")
    prep = fit_transform(td, np.zeros(6, dtype=np.int64))
    full = prep.pre.transform(td)
    np.testing.assert_allclose(full, prep.X, atol=1e-12)
    row = {"age": "30", "color": "blue", "income": "60000"}
    np.testing.assert_allclose(prep.pre.transform_row(row), full[1], atol=1e-12)
    with pytest.raises(DataError, match="missing feature"):
        prep.pre.transform_row({"age": "30", "color": "blue"})
    with pytest.raises(DataError, match="not numeric"):
        prep.pre.transform_row({"age": "old", "color": "blue", "income": "1"})


def test_inverse_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3)) * [2.0, 5.0, 0.1] + [1.0, -7.0, 3.0]
    td = dataset_from_arrays(X, rng.integers(0, 2, 50), "binary")
    prep = fit_transform(td, np.zeros(50, dtype=np.int64))
    for i in range(0, 50, 7):
        np.testing.assert_allclose(prep.pre.inverse(prep.X[i]), X[i], atol=1e-12)


def test_encode_target_and_labels(tmp_path):
    td = load_csv(_write(tmp_path, CSV_MIXED), "label")
    prep = fit_transform(td, np.zeros(6, dtype=np.int64))
    np.testing.assert_array_equal(prep.y, [0, 1, 0, 1, 0, 1])
    assert prep.pre.positive_class_name() == "no"
    with pytest.raises(DataError, match="unknown target"):
        prep.pre.encode_target(np.array(["maybe"], dtype=object))


def test_preprocessor_round_trip(tmp_path):
    td = load_csv(_write(tmp_path, CSV_MIXED), "label")
    prep = fit_transform(td, np.zeros(6, dtype=np.int64))
    clone = Preprocessor.from_dict(prep.pre.to_dict())
    np.testing.assert_allclose(clone.transform(td), prep.X, atol=0)
    assert clone.feature_names() == prep.pre.feature_names()


def test_prepared_data_parts():
    X = np.arange(20, dtype=np.float64).reshape(10, 2)
    td = dataset_from_arrays(X, np.array([0, 1] * 5), "binary")
    assignment = np.array([0, 0, 0, 0, 1, 1, 2, 2, 0, 1])
    prep = fit_transform(td, assignment)
    assert prep.train[0].shape[0] == 5
    assert prep.val[0].shape[0] == 3
    assert prep.test[0].shape[0] == 2


def test_half_moon_exact_geometry():
    X, y = half_moon(200, noise=0.0)
    outer = X[y == 0]
    inner = X[y == 1]
    np.testing.assert_allclose(np.linalg.norm(outer, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(
        np.linalg.norm(inner - np.array([1.0, 0.5]), axis=1), 1.0, atol=1e-12)
    assert np.all(outer[:, 1] >= -1e-12)       # upper arc
    assert np.all(inner[:, 1] <= 0.5 + 1e-12)  # lower arc


def test_half_moon_rotation_is_rigid():
    X0, y0 = half_moon(100, noise=0.05, seed=3)
    X45, y45 = half_moon(100, noise=0.05, rotation_deg=45.0, seed=3)
    np.testing.assert_array_equal(y0, y45)
    th = math.radians(45.0)
    rot = np.array([[math.cos(th), -math.sin(th)],
                    [math.sin(th), math.cos(th)]])
    np.testing.assert_allclose(X45 @ rot, X0, atol=1e-12)


def test_half_moon_noise_features_uninformative():
    X, y = half_moon(300, noise=0.1, n_noise_features=4, seed=5)
    assert X.shape == (300, 6)
    extra = X[:, 2:]
    assert extra.min() >= -1.0 and extra.max() <= 1.0
    assert abs(np.corrcoef(extra[:, 0], y)[0, 1]) < 0.2


def test_half_moon_determinism_and_validation():
    X1, _ = half_moon(50, seed=9)
    X2, _ = half_moon(50, seed=9)
    np.testing.assert_array_equal(X1, X2)
    with pytest.raises(DataError):
        half_moon(1)


def test_save_csv_round_trip(tmp_path):
    X, y = half_moon(40, noise=0.2, seed=1)
    path = str(tmp_path / "hm.csv")
    save_csv(path, X, y, ["x0", "x1"])
    td = load_csv(path, "label")
    assert td.schema.task == "binary"
    back = np.column_stack(td.columns)
    np.testing.assert_array_equal(back, X)    # repr floats are lossless
    np.testing.assert_array_equal(td.target.astype(str),
                                  y.astype(int).astype(str))


def test_dataset_from_arrays_levels_sorted_numerically():
    y = np.array([10, 2, 10, 2, 5])
    td = dataset_from_arrays(np.zeros((5, 1)), y, "multiclass")
    assert td.schema.target_levels == ["2", "5", "10"]
