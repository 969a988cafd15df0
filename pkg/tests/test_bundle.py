"""Bundle persistence: bit-exact round trips and corruption reporting."""
import json
import os

import numpy as np
import pytest

from leurn.bundle import ModelBundle, load_bundle, save_bundle
from leurn.data import dataset_from_arrays, fit_transform, half_moon, split
from leurn.errors import BundleError
from leurn.model import LeurnConfig, init_params
from leurn.similarity import build_index
from leurn.train import TrainConfig, fit, predict_batch


@pytest.fixture(scope="module")
def trained():
    X, y = half_moon(400, noise=0.2, seed=8)
    data = dataset_from_arrays(X, y, "binary", feature_names=["x0", "x1"])
    assignment = split(data.n_rows, seed=0, labels=data.target)
    prep = fit_transform(data, assignment)
    cfg = LeurnConfig(n_features=prep.X.shape[1], depth=1, regions=3, seed=0)
    tcfg = TrainConfig(max_epochs=25, patience=10, batch_size=64, seed=0)
    params, _ = fit(cfg, tcfg, prep.train, prep.val)
    return cfg, params, prep, data.schema


def test_round_trip_is_bit_exact(tmp_path, trained):
    cfg, params, prep, schema = trained
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema, provenance={"note": "t"})
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    loaded = load_bundle(path)

    assert loaded.config == cfg
    for a, b in zip(params.arrays(), loaded.params.arrays()):
        assert a.dtype == b.dtype == np.float64
        assert np.array_equal(a, b)
    X = np.asarray(np.random.default_rng(1).normal(size=(1000, 2)))
    p1 = predict_batch(params, cfg, X)
    p2 = predict_batch(loaded.params, loaded.config, X)
    assert np.array_equal(p1, p2)
    assert loaded.provenance == {"note": "t"}
    assert loaded.schema.to_dict() == schema.to_dict()
    assert loaded.preprocessor.to_dict() == prep.pre.to_dict()


def test_round_trip_preserves_index(tmp_path, trained):
    cfg, params, prep, schema = trained
    index = build_index(params, cfg, prep.train[0])
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema, index=index)
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    loaded = load_bundle(path)
    assert loaded.index is not None
    assert loaded.index.gamma == index.gamma
    assert np.array_equal(loaded.index.embeddings, index.embeddings)


def test_save_twice_identical_bytes(tmp_path, trained, monkeypatch):
    cfg, params, prep, schema = trained
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema)
    p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    save_bundle(bundle, p1)
    save_bundle(bundle, p2)
    with open(p1, "rb") as f1, open(p2, "rb") as f2:
        assert f1.read() == f2.read()
    doc = json.load(open(p1))
    assert doc["created"] == "2023-11-14T22:13:20+00:00"


def test_missing_file(tmp_path):
    with pytest.raises(BundleError, match="cannot read"):
        load_bundle(str(tmp_path / "nope.json"))


def test_truncated_file(tmp_path, trained):
    cfg, params, prep, schema = trained
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema)
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    blob = open(path, "rb").read()
    with open(path, "wb") as fh:
        fh.write(blob[: len(blob) // 2])
    with pytest.raises(BundleError, match="truncated or corrupt"):
        load_bundle(path)


def test_version_mismatch(tmp_path, trained):
    cfg, params, prep, schema = trained
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema)
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    doc = json.load(open(path))
    doc["format_version"] = 99
    json.dump(doc, open(path, "w"))
    with pytest.raises(BundleError, match="version"):
        load_bundle(path)


def test_corrupt_field(tmp_path, trained):
    cfg, params, prep, schema = trained
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema)
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    doc = json.load(open(path))
    del doc["params"]["tau0"]
    json.dump(doc, open(path, "w"))
    with pytest.raises(BundleError, match="corrupt field"):
        load_bundle(path)


def test_shape_violation(tmp_path, trained):
    cfg, params, prep, schema = trained
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema)
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    doc = json.load(open(path))
    doc["params"]["tau0"] = doc["params"]["tau0"][:-1]
    json.dump(doc, open(path, "w"))
    with pytest.raises(BundleError, match="shape invariants"):
        load_bundle(path)


def test_feature_count_mismatch(tmp_path, trained):
    cfg, params, prep, schema = trained
    other = init_params(LeurnConfig(n_features=3, depth=1, regions=3, seed=0))
    bundle = ModelBundle(
        config=LeurnConfig(n_features=3, depth=1, regions=3, seed=0),
        params=other, preprocessor=prep.pre, schema=schema)
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    with pytest.raises(BundleError, match="expects 3"):
        load_bundle(path)


def test_index_width_mismatch(tmp_path, trained):
    cfg, params, prep, schema = trained
    index = build_index(params, cfg, prep.train[0])
    bundle = ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                         schema=schema, index=index)
    path = str(tmp_path / "m.json")
    save_bundle(bundle, path)
    doc = json.load(open(path))
    doc["index"]["embeddings"] = [row[:-1] for row in doc["index"]["embeddings"]]
    json.dump(doc, open(path, "w"))
    with pytest.raises(BundleError, match="index width"):
        load_bundle(path)


def test_not_an_object(tmp_path):
    path = str(tmp_path / "m.json")
    with open(path, "w") as fh:
        fh.write("[1, 2, 3]\n")
    with pytest.raises(BundleError, match="not a JSON object"):
        load_bundle(path)
