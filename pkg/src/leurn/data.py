"""CSV ingestion, preprocessing and synthetic data.

Continuous columns standardize to zero mean / unit variance; categorical
columns one-hot encode and the indicator columns standardize the same way,
so every model input has train mean 0 and std 1. All statistics, encodings
and imputation values come from the train split only.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .numeric import rng_from_seed

DEFAULT_RATIOS = (0.65, 0.15, 0.20)
TRAIN, VAL, TEST = 0, 1, 2


@dataclass
class ColumnSpec:
    name: str
    kind: str                        # "continuous" | "categorical"
    levels: list[str] | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "levels": self.levels}


@dataclass
class Schema:
    columns: list[ColumnSpec]
    target: str
    task: str
    target_levels: list[str] | None

    def to_dict(self) -> dict:
        return {"columns": [c.to_dict() for c in self.columns],
                "target": self.target, "task": self.task,
                "target_levels": self.target_levels}

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        return cls(columns=[ColumnSpec(**c) for c in d["columns"]],
                   target=d["target"], task=d["task"],
                   target_levels=d["target_levels"])


@dataclass
class TabularData:
    """Parsed raw table: typed columns plus the target."""

    schema: Schema
    columns: list[np.ndarray]        # float64 (NaN missing) or object (None missing)
    target: np.ndarray               # float64 (regression) or object labels
    n_rows: int

    @property
    def task(self) -> str:
        return self.schema.task

    def class_labels(self) -> np.ndarray | None:
        """Encoded integer labels for stratification; None for regression."""
        if self.task == "regression":
            return None
        lut = {lv: i for i, lv in enumerate(self.schema.target_levels)}
        return np.array([lut[v] for v in self.target], dtype=np.int64)

    def take(self, rows: np.ndarray) -> "TabularData":
        return TabularData(schema=self.schema,
                           columns=[c[rows] for c in self.columns],
                           target=self.target[rows], n_rows=len(rows))


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _canonical_level(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def load_csv(path: str, target: str, task: str | None = None) -> TabularData:
    """Read a headed CSV; infer column kinds and the target task."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if not rows:
        raise DataError(f"{path} is empty")
    header = rows[0]
    body = rows[1:]
    if target not in header:
        raise DataError(f"target column {target!r} not in header {header}")
    width = len(header)
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(f"row {i + 1} has {len(row)} cells, expected {width}")
    if not body:
        raise DataError(f"{path} has no data rows")
    tgt_idx = header.index(target)
    n = len(body)

    columns: list[np.ndarray] = []
    specs: list[ColumnSpec] = []
    for ci, name in enumerate(header):
        if ci == tgt_idx:
            continue
        cells = [row[ci] for row in body]
        non_missing = [c for c in cells if c != ""]
        if not non_missing:
            raise DataError(f"column {name!r} has no values")
        parsed = [_parse_float(c) for c in non_missing]
        if all(p is not None for p in parsed):
            col = np.array([float(c) if c != "" else math.nan for c in cells])
            specs.append(ColumnSpec(name=name, kind="continuous"))
        else:
            col = np.array([c if c != "" else None for c in cells], dtype=object)
            levels = []
            for c in cells:
                if c != "" and c not in levels:
                    levels.append(c)
            specs.append(ColumnSpec(name=name, kind="categorical", levels=levels))
        columns.append(col)

    tgt_cells = [row[tgt_idx] for row in body]
    missing_tgt = [i + 1 for i, c in enumerate(tgt_cells) if c == ""]
    if missing_tgt:
        raise DataError(f"target column {target!r} has missing values at rows "
                        f"{missing_tgt[:5]}")
    tgt_parsed = [_parse_float(c) for c in tgt_cells]
    numeric_target = all(p is not None for p in tgt_parsed)
    if task is None:
        if numeric_target:
            distinct = sorted(set(tgt_parsed))
            task = "binary" if len(distinct) == 2 else "regression"
        else:
            distinct = []
            for c in tgt_cells:
                if c not in distinct:
                    distinct.append(c)
            task = "binary" if len(distinct) == 2 else "multiclass"
    if task == "regression":
        if not numeric_target:
            raise DataError("regression target must be numeric")
        target_levels = None
        tgt = np.array(tgt_parsed, dtype=np.float64)
    else:
        if numeric_target:
            uniq = sorted(set(tgt_parsed))
            target_levels = [_canonical_level(v) for v in uniq]
            tgt = np.array([_canonical_level(v) for v in tgt_parsed], dtype=object)
        else:
            target_levels = []
            for c in tgt_cells:
                if c not in target_levels:
                    target_levels.append(c)
            tgt = np.array(tgt_cells, dtype=object)
        if task == "binary" and len(target_levels) != 2:
            raise DataError(f"binary target has {len(target_levels)} levels")
        if task == "multiclass" and len(target_levels) < 2:
            raise DataError("multiclass target needs at least 2 levels")

    schema = Schema(columns=specs, target=target, task=task,
                    target_levels=target_levels)
    return TabularData(schema=schema, columns=columns, target=tgt, n_rows=n)


def dataset_from_arrays(X: np.ndarray, y: np.ndarray, task: str,
                        feature_names: list[str] | None = None,
                        target_name: str = "label") -> TabularData:
    """TabularData over purely numeric in-memory arrays."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"X must be 2-D, got shape {X.shape}")
    names = feature_names or [f"x{i}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise DataError("feature_names length does not match X")
    specs = [ColumnSpec(name=nm, kind="continuous") for nm in names]
    if task == "regression":
        tgt = np.asarray(y, dtype=np.float64)
        levels = None
    else:
        vals = [_canonical_level(float(v)) for v in np.asarray(y).ravel()]
        levels = sorted(set(vals), key=lambda s: float(s))
        tgt = np.array(vals, dtype=object)
        if task == "binary" and len(levels) != 2:
            raise DataError(f"binary target has {len(levels)} levels")
    schema = Schema(columns=specs, target=target_name, task=task,
                    target_levels=levels)
    return TabularData(schema=schema, columns=[X[:, i] for i in range(X.shape[1])],
                       target=tgt, n_rows=X.shape[0])


# ---------------------------------------------------------------------------
# splitting

def split(n: int, ratios: tuple[float, float, float] = DEFAULT_RATIOS,
          seed: int = 0, labels: np.ndarray | None = None) -> np.ndarray:
    """Assign each row to train(0)/val(1)/test(2); stratified when labeled."""
    if n < 3:
        raise DataError(f"need at least 3 rows to split, got {n}")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise DataError(f"ratios must be 3 nonnegative values, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1, got {ratios}")
    rng = rng_from_seed(seed)
    assignment = np.empty(n, dtype=np.int64)

    def cut(idx: np.ndarray):
        m = idx.size
        c1 = int(round(m * ratios[0]))
        c2 = int(round(m * (ratios[0] + ratios[1])))
        assignment[idx[:c1]] = TRAIN
        assignment[idx[c1:c2]] = VAL
        assignment[idx[c2:]] = TEST

    if labels is None:
        cut(rng.permutation(n))
    else:
        labels = np.asarray(labels).ravel()
        if labels.shape[0] != n:
            raise DataError(f"labels length {labels.shape[0]} != n {n}")
        for c in np.unique(labels):
            idx = np.flatnonzero(labels == c)
            cut(idx[rng.permutation(idx.size)])
        for s, r in ((TRAIN, ratios[0]), (VAL, ratios[1]), (TEST, ratios[2])):
            if r == 0:
                continue
            present = np.unique(labels[assignment == s])
            if present.size != np.unique(labels).size:
                raise DataError(
                    f"a class is absent from split {s}; dataset too small or "
                    f"too imbalanced for ratios {ratios}")
    return assignment


# ---------------------------------------------------------------------------
# preprocessing

@dataclass
class OutputColumn:
    """One model input column: a continuous source or one indicator level."""

    source: str
    kind: str                # "continuous" | "categorical"
    level: str | None
    mean: float
    std: float
    std_min: float           # train bounds in standardized units
    std_max: float

    @property
    def name(self) -> str:
        return self.source if self.level is None else f"{self.source}={self.level}"

    def to_dict(self) -> dict:
        return {"source": self.source, "kind": self.kind, "level": self.level,
                "mean": self.mean, "std": self.std,
                "std_min": self.std_min, "std_max": self.std_max}


@dataclass
class Preprocessor:
    """Train-split-fitted transform from raw columns to model inputs."""

    out_cols: list[OutputColumn]
    impute: dict               # source name -> median (float) or mode (str)
    source_order: list[str]
    source_kinds: dict         # source name -> kind
    source_levels: dict        # source name -> train levels (categorical only)
    schema: Schema

    # -- metadata views ----------------------------------------------------
    def feature_names(self) -> list[str]:
        return [c.name for c in self.out_cols]

    def feature_kinds(self) -> list[str]:
        return [c.kind for c in self.out_cols]

    def feature_levels(self) -> list[str | None]:
        return [c.level for c in self.out_cols]

    @property
    def n_features(self) -> int:
        return len(self.out_cols)

    def stats(self) -> tuple[np.ndarray, np.ndarray]:
        mu = np.array([c.mean for c in self.out_cols])
        sigma = np.array([c.std for c in self.out_cols])
        return mu, sigma

    def std_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([c.std_min for c in self.out_cols])
        hi = np.array([c.std_max for c in self.out_cols])
        return lo, hi

    def raw_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        mu, sigma = self.stats()
        lo, hi = self.std_bounds()
        return mu + sigma * lo, mu + sigma * hi

    # -- transforms ----------------------------------------------------------
    def _raw_matrix(self, columns_by_source: dict) -> np.ndarray:
        n = None
        for src in self.source_order:
            if src not in columns_by_source:
                raise DataError(f"missing feature column {src!r}")
            m = len(columns_by_source[src])
            if n is None:
                n = m
            elif m != n:
                raise DataError(f"column {src!r} has {m} rows, expected {n}")
        X = np.empty((n, len(self.out_cols)))
        warned: set[str] = set()
        for oi, oc in enumerate(self.out_cols):
            col = columns_by_source[oc.source]
            if oc.kind == "continuous":
                vals = np.array([
                    self.impute[oc.source] if v is None or
                    (isinstance(v, float) and math.isnan(v)) else float(v)
                    for v in col], dtype=np.float64)
                X[:, oi] = vals
            else:
                lv = oc.level
                filled = [self.impute[oc.source] if v is None else v for v in col]
                known = set(self.source_levels[oc.source])
                for v in filled:
                    if v not in known and oc.source not in warned:
                        warnings.warn(f"column {oc.source!r}: level {v!r} unseen "
                                      f"in training; encoding as all zeros")
                        warned.add(oc.source)
                X[:, oi] = np.array([1.0 if v == lv else 0.0 for v in filled])
        mu, sigma = self.stats()
        return (X - mu[None, :]) / sigma[None, :]

    def transform_raw_columns(self, columns_by_source: dict) -> np.ndarray:
        """Standardized matrix from raw columns keyed by source name."""
        return self._raw_matrix(columns_by_source)

    def transform(self, data: TabularData) -> np.ndarray:
        """Standardized model inputs for every row of a parsed table."""
        by_src = {}
        for spec, col in zip(data.schema.columns, data.columns):
            if spec.kind == "continuous":
                by_src[spec.name] = [float(v) for v in col]
            else:
                by_src[spec.name] = list(col)
        for src in self.source_order:
            if src not in by_src:
                raise DataError(f"missing feature column {src!r}")
            if self.source_kinds[src] == "continuous":
                for i, v in enumerate(by_src[src]):
                    if v is not None and not isinstance(v, float):
                        parsed = _parse_float(str(v))
                        if parsed is None:
                            raise DataError(
                                f"column {src!r} row {i + 1}: {v!r} is not numeric")
                        by_src[src][i] = parsed
        return self._raw_matrix(by_src)

    def transform_row(self, row: dict) -> np.ndarray:
        """Standardized vector for one raw row given as {column: value}."""
        cols = {}
        for src in self.source_order:
            if src not in row:
                raise DataError(f"row is missing feature {src!r}")
            v = row[src]
            if v is None or v == "":
                cols[src] = [None if self.source_kinds[src] == "categorical"
                             else math.nan]
            elif self.source_kinds[src] == "continuous":
                parsed = _parse_float(str(v))
                if parsed is None:
                    raise DataError(f"column {src!r}: {v!r} is not numeric")
                cols[src] = [parsed]
            else:
                cols[src] = [str(v)]
        return self._raw_matrix(cols)[0]

    def inverse(self, x_std: np.ndarray) -> np.ndarray:
        """Raw-unit values for a standardized model-input vector."""
        mu, sigma = self.stats()
        return mu + sigma * np.asarray(x_std, dtype=np.float64)

    # -- target handling -----------------------------------------------------
    def encode_target(self, target: np.ndarray) -> np.ndarray:
        if self.schema.task == "regression":
            return np.asarray(target, dtype=np.float64)
        lut = {lv: i for i, lv in enumerate(self.schema.target_levels)}
        try:
            return np.array([lut[v] for v in target], dtype=np.int64)
        except KeyError as e:
            raise DataError(f"unknown target label {e.args[0]!r}") from e

    def positive_class_name(self) -> str:
        if self.schema.task != "binary":
            raise ConfigError("positive class is only defined for binary tasks")
        return self.schema.target_levels[1]

    def output_label(self, outputs: np.ndarray, cfg) -> str:
        if cfg.task == "binary":
            return self.schema.target_levels[1 if outputs[0] >= 0.5 else 0]
        if cfg.task == "multiclass":
            return self.schema.target_levels[int(np.argmax(outputs))]
        return repr(float(outputs[0]))

    # -- persistence -----------------------------------------------------------
    def to_dict(self) -> dict:
        return {"out_cols": [c.to_dict() for c in self.out_cols],
                "impute": self.impute, "source_order": self.source_order,
                "source_kinds": self.source_kinds,
                "source_levels": self.source_levels,
                "schema": self.schema.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        return cls(out_cols=[OutputColumn(**c) for c in d["out_cols"]],
                   impute=d["impute"], source_order=d["source_order"],
                   source_kinds=d["source_kinds"],
                   source_levels=d["source_levels"],
                   schema=Schema.from_dict(d["schema"]))


@dataclass
class PreparedData:
    """Standardized matrices plus the fitted preprocessor."""

    X: np.ndarray
    y: np.ndarray
    assignment: np.ndarray
    pre: Preprocessor

    def part(self, which: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.assignment == which
        return self.X[m], self.y[m]

    @property
    def train(self):
        return self.part(TRAIN)

    @property
    def val(self):
        return self.part(VAL)

    @property
    def test(self):
        return self.part(TEST)


def fit_transform(data: TabularData, assignment: np.ndarray) -> PreparedData:
    """Fit the preprocessor on the train rows and transform every row."""
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape[0] != data.n_rows:
        raise DataError(f"assignment length {assignment.shape[0]} != "
                        f"{data.n_rows} rows")
    train_mask = assignment == TRAIN
    if not train_mask.any():
        raise DataError("train split is empty")

    out_cols: list[OutputColumn] = []
    impute: dict = {}
    source_levels: dict = {}
    raw_cols: list[tuple[str, str, str | None, np.ndarray]] = []

    # continuous sources keep file order, then one-hot blocks in file order
    for pass_kind in ("continuous", "categorical"):
        for spec, col in zip(data.schema.columns, data.columns):
            if spec.kind != pass_kind:
                continue
            if spec.kind == "continuous":
                vals = np.asarray(col, dtype=np.float64)
                train_vals = vals[train_mask]
                finite = train_vals[np.isfinite(train_vals)]
                if finite.size == 0:
                    raise DataError(f"column {spec.name!r} has no training values")
                med = float(np.median(finite))
                impute[spec.name] = med
                filled = np.where(np.isfinite(vals), vals, med)
                raw_cols.append((spec.name, "continuous", None, filled))
            else:
                levels: list[str] = []
                for i in np.flatnonzero(train_mask):
                    v = col[i]
                    if v is not None and v not in levels:
                        levels.append(v)
                if not levels:
                    raise DataError(f"column {spec.name!r} has no training values")
                counts = {lv: 0 for lv in levels}
                for i in np.flatnonzero(train_mask):
                    if col[i] is not None:
                        counts[col[i]] += 1
                mode = max(levels, key=lambda lv: (counts[lv], -levels.index(lv)))
                impute[spec.name] = mode
                source_levels[spec.name] = levels
                filled = np.array([mode if v is None else v for v in col],
                                  dtype=object)
                unseen = sorted({v for i, v in enumerate(filled)
                                 if v not in counts})
                if unseen:
                    warnings.warn(f"column {spec.name!r}: levels {unseen} unseen "
                                  f"in training; encoding as all zeros")
                for lv in levels:
                    ind = (filled == lv).astype(np.float64)
                    raw_cols.append((spec.name, "categorical", lv, ind))

    kept: list[np.ndarray] = []
    for src, kind, level, vals in raw_cols:
        train_vals = vals[train_mask]
        mu = float(train_vals.mean())
        sd = float(train_vals.std())
        if sd == 0.0:
            nm = src if level is None else f"{src}={level}"
            warnings.warn(f"dropping constant column {nm!r} (zero train variance)")
            continue
        z = (vals - mu) / sd
        zt = z[train_mask]
        out_cols.append(OutputColumn(source=src, kind=kind, level=level,
                                     mean=mu, std=sd,
                                     std_min=float(zt.min()),
                                     std_max=float(zt.max())))
        kept.append(z)
    if not kept:
        raise DataError("no usable feature columns after preprocessing")

    X = np.column_stack(kept)
    pre = Preprocessor(out_cols=out_cols, impute=impute,
                       source_order=[s.name for s in data.schema.columns],
                       source_kinds={s.name: s.kind for s in data.schema.columns},
                       source_levels=source_levels, schema=data.schema)
    y = pre.encode_target(data.target)
    return PreparedData(X=X, y=y, assignment=assignment, pre=pre)


# ---------------------------------------------------------------------------
# synthetic data

def half_moon(n: int, noise: float = 0.1, rotation_deg: float = 0.0,
              n_noise_features: int = 0, seed: int = 0
              ) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved half circles with optional rotation and noise features.

    Class 0 is the upper arc of the unit circle; class 1 is a lower arc
    shifted right and down. Gaussian noise perturbs the two coordinates,
    then the whole cloud rotates rigidly about the origin. Extra features
    are uniform on [-1, 1] and carry no class signal.
    """
    if n < 2:
        raise DataError(f"half_moon needs n >= 2, got {n}")
    rng = rng_from_seed(seed)
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, math.pi, n_out)
    t_in = np.linspace(0.0, math.pi, n_in)
    xy = np.empty((n, 2))
    xy[:n_out, 0] = np.cos(t_out)
    xy[:n_out, 1] = np.sin(t_out)
    xy[n_out:, 0] = 1.0 - np.cos(t_in)
    xy[n_out:, 1] = 1.0 - np.sin(t_in) - 0.5
    y = np.concatenate([np.zeros(n_out, dtype=np.int64),
                        np.ones(n_in, dtype=np.int64)])
    if noise > 0:
        xy = xy + rng.normal(scale=noise, size=xy.shape)
    if rotation_deg != 0.0:
        th = math.radians(rotation_deg)
        rot = np.array([[math.cos(th), -math.sin(th)],
                        [math.sin(th), math.cos(th)]])
        xy = xy @ rot.T
    if n_noise_features > 0:
        extra = rng.uniform(-1.0, 1.0, size=(n, n_noise_features))
        X = np.hstack([xy, extra])
    else:
        X = xy
    return X, y


def save_csv(path: str, X: np.ndarray, y: np.ndarray,
             feature_names: list[str], target_name: str = "label") -> None:
    """Write a feature matrix and target as a headed CSV."""
    X = np.asarray(X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(feature_names) + [target_name])
        for i in range(X.shape[0]):
            w.writerow([repr(float(v)) for v in X[i]] + [_fmt_target(y[i])])


def _fmt_target(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _canonical_level(float(v)) if float(v).is_integer() else repr(float(v))
    return str(v)
