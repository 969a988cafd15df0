"""Model persistence: a versioned JSON document holding config, parameters,
preprocessor, schema, optional embedding index and training provenance.

Floats serialize at full 64-bit precision (shortest round-trip repr), so a
save/load cycle reproduces predictions bit-exactly.
"""
from __future__ import annotations

import datetime
import json
import os
from dataclasses import dataclass

import numpy as np

from .data import Preprocessor, Schema
from .errors import BundleError, LeurnError
from .model import LeurnConfig, LeurnParams, validate_params
from .similarity import EmbeddingIndex

FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    config: LeurnConfig
    params: LeurnParams
    preprocessor: Preprocessor
    schema: Schema
    index: EmbeddingIndex | None = None
    provenance: dict | None = None


def _timestamp() -> str:
    """Creation time; honors SOURCE_DATE_EPOCH for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        dt = datetime.datetime.now(tz=datetime.timezone.utc)
    return dt.isoformat()


def save_bundle(bundle: ModelBundle, path: str) -> None:
    p = bundle.params
    doc = {
        "format_version": FORMAT_VERSION,
        "created": _timestamp(),
        "config": bundle.config.to_dict(),
        "params": {
            "tau0": p.tau0.tolist(),
            "rule_weights": [w.tolist() for w in p.rule_weights],
            "rule_biases": [b.tolist() for b in p.rule_biases],
            "head_weight": p.head_weight.tolist(),
            "head_bias": p.head_bias.tolist(),
        },
        "preprocessor": bundle.preprocessor.to_dict(),
        "schema": bundle.schema.to_dict(),
        "index": None if bundle.index is None else {
            "gamma": bundle.index.gamma,
            "embeddings": bundle.index.embeddings.tolist(),
        },
        "provenance": bundle.provenance or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_bundle(path: str) -> ModelBundle:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise BundleError(f"cannot read bundle {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise BundleError(f"bundle {path} is truncated or corrupt: {e}") from e
    if not isinstance(doc, dict):
        raise BundleError(f"bundle {path} is not a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleError(f"bundle format version {version!r} unsupported "
                          f"(expected {FORMAT_VERSION})")
    try:
        cfg = LeurnConfig.from_dict(doc["config"])
        pd = doc["params"]
        params = LeurnParams(
            tau0=np.asarray(pd["tau0"], dtype=np.float64),
            rule_weights=[np.asarray(w, dtype=np.float64)
                          for w in pd["rule_weights"]],
            rule_biases=[np.asarray(b, dtype=np.float64)
                         for b in pd["rule_biases"]],
            head_weight=np.asarray(pd["head_weight"], dtype=np.float64),
            head_bias=np.asarray(pd["head_bias"], dtype=np.float64),
        )
        pre = Preprocessor.from_dict(doc["preprocessor"])
        schema = Schema.from_dict(doc["schema"])
        index = None
        if doc.get("index") is not None:
            index = EmbeddingIndex(
                embeddings=np.asarray(doc["index"]["embeddings"],
                                      dtype=np.float64),
                gamma=float(doc["index"]["gamma"]))
        provenance = doc.get("provenance") or {}
    except (KeyError, TypeError, ValueError) as e:
        raise BundleError(f"bundle {path} has a corrupt field: {e}") from e
    try:
        validate_params(params, cfg)
    except LeurnError as e:
        raise BundleError(f"bundle {path} violates shape invariants: {e}") from e
    if pre.n_features != cfg.n_features:
        raise BundleError(
            f"bundle {path}: preprocessor emits {pre.n_features} features but "
            f"the model expects {cfg.n_features}")
    if index is not None:
        want = (cfg.depth + 1) * cfg.n_features
        if index.embeddings.shape[1] != want:
            raise BundleError(
                f"bundle {path}: index width {index.embeddings.shape[1]}, "
                f"expected {want}")
    return ModelBundle(config=cfg, params=params, preprocessor=pre,
                       schema=schema, index=index, provenance=provenance)
