"""Additive attributions: every threshold and the final score decompose
exactly into weight-times-embedding terms plus an equally shared bias."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .errors import ConfigError, DataError, ShapeError
from .model import ForwardTrace, LeurnConfig, LeurnParams, activate, forward
from .rules import Region, extract_region, simplify


@dataclass
class Contribution:
    """One weight-times-embedding term feeding a threshold or output unit."""

    src_layer: int
    src_feature: int
    target: str              # "threshold" or "output"
    tgt_layer: int | None    # threshold targets: which layer's tau
    tgt_index: int           # feature index (threshold) or output unit
    value: float
    bias_share: float = 0.0


@dataclass
class ImportanceTable:
    """Mean absolute per-feature score contribution over a dataset."""

    scores: np.ndarray
    normalizer: float
    feature_names: list[str] | None = None

    def normalized(self) -> np.ndarray:
        if self.normalizer == 0.0:
            return self.scores.copy()
        return self.scores / self.normalizer


def contributions(params: LeurnParams, cfg: LeurnConfig, trace: ForwardTrace,
                  redundant: set[tuple[int, int]] | None = None) -> list[Contribution]:
    """Exact decomposition of every threshold and logit.

    Each target's bias is split equally over its non-redundant source rules;
    `redundant` holds (layer, feature) pairs to exclude as recipients.
    """
    n = cfg.n_features
    d = cfg.depth
    if trace.e_cat.shape != ((d + 1) * n,):
        raise ShapeError(f"trace embedding length {trace.e_cat.shape[0]} does not "
                         f"match a depth-{d}, {n}-feature model")
    if trace.masks is not None:
        raise ConfigError("contributions need an evaluation-mode trace")
    redundant = redundant or set()
    out: list[Contribution] = []

    def emit(width, weight_col, bias_val, target, tgt_layer, tgt_index):
        recipients = [i for i in range(width)
                      if (i // n, i % n) not in redundant]
        share = bias_val / len(recipients) if recipients else 0.0
        rec_set = set(recipients)
        for i in range(width):
            out.append(Contribution(
                src_layer=i // n, src_feature=i % n, target=target,
                tgt_layer=tgt_layer, tgt_index=tgt_index,
                value=float(weight_col[i] * trace.e_cat[i]),
                bias_share=share if i in rec_set else 0.0))

    for j in range(1, d + 1):
        w = params.rule_weights[j - 1]
        b = params.rule_biases[j - 1]
        for f in range(n):
            emit(j * n, w[:, f], float(b[f]), "threshold", j, f)
    for c in range(cfg.output_dim):
        emit((d + 1) * n, params.head_weight[:, c], float(params.head_bias[c]),
             "output", None, c)
    return out


def target_total(contribs: list[Contribution], target: str,
                 tgt_layer: int | None, tgt_index: int) -> float:
    """Sum of values plus bias shares for one target."""
    return sum(c.value + c.bias_share for c in contribs
               if c.target == target and c.tgt_layer == tgt_layer
               and c.tgt_index == tgt_index)


def merge_redundant(contribs: list[Contribution], region: Region) -> list[Contribution]:
    """Fold each redundant rule's terms into its absorbing rule's terms.

    Totals per target are preserved exactly; category-bias entries are not
    redundant and stay as their own rows.
    """
    absorber = {}
    for e in region.entries:
        if e.redundant:
            if e.absorbed_by is None:
                raise DataError(f"redundant rule (layer {e.layer}, feature "
                                f"{e.feature}) has no absorbing entry")
            absorber[(e.layer, e.feature)] = e.absorbed_by
    if not absorber:
        return [Contribution(**vars(c)) for c in contribs]
    merged: dict[tuple, Contribution] = {}
    order: list[tuple] = []
    for c in contribs:
        src = (c.src_layer, c.src_feature)
        tgt = (c.target, c.tgt_layer, c.tgt_index)
        if src in absorber:
            key = ((absorber[src], c.src_feature), tgt)
            if key not in merged:
                raise DataError(
                    f"rule (layer {src[0]}, feature {src[1]}) absorbs into "
                    f"layer {absorber[src]} but no such contribution exists")
            merged[key].value += c.value
            merged[key].bias_share += c.bias_share
        else:
            key = (src, tgt)
            if key in merged:
                merged[key].value += c.value
                merged[key].bias_share += c.bias_share
            else:
                merged[key] = Contribution(**vars(c))
                order.append(key)
    return [merged[k] for k in order]


# ---------------------------------------------------------------------------
# report rendering

def render_rule(feature_name: str, lo_raw: float, hi_raw: float,
                kind: str = "continuous", level: str | None = None) -> str:
    """Human-readable rule text in raw units.

    Continuous rules use the upper > X >= lower layout; one-hot rules whose
    interval pins the indicator render as feature = level (or != level).
    """
    if kind == "categorical" and level is not None:
        has_zero = lo_raw <= 0.0 < hi_raw
        has_one = lo_raw <= 1.0 < hi_raw
        if has_one and not has_zero:
            return f"{feature_name} = {level}"
        if has_zero and not has_one:
            return f"{feature_name} != {level}"
    if lo_raw == -math.inf and hi_raw == math.inf:
        return f"{feature_name} unconstrained"
    if lo_raw == -math.inf:
        return f"{hi_raw:.4f} > {feature_name}"
    if hi_raw == math.inf:
        return f"{feature_name} >= {lo_raw:.4f}"
    return f"{hi_raw:.4f} > {feature_name} >= {lo_raw:.4f}"


@dataclass
class ExplanationReport:
    """Rules, threshold provenance and score contributions for one sample."""

    rule_rows: list[dict]
    threshold_rows: list[dict]
    score_rows: list[dict]
    logit: float
    outputs: list[float]
    predicted_label: str
    positive_class_note: str | None = None
    feature_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"rules": self.rule_rows, "thresholds": self.threshold_rows,
                "score_contributions": self.score_rows, "logit": self.logit,
                "outputs": self.outputs, "predicted_label": self.predicted_label,
                "positive_class_note": self.positive_class_note}

    def to_text(self) -> str:
        lines = ["== Rules =="]
        for r in self.rule_rows:
            tag = ""
            if r["category_bias"]:
                tag = "  [category bias: spans training range]"
            lines.append(f"layer {r['layer']}: {r['text']}{tag}")
        lines.append("")
        lines.append("== Threshold provenance ==")
        for t in self.threshold_rows:
            lines.append(f"tau[layer {t['layer']}, {t['feature']}] = {t['total']:+.6f}")
            for s in t["sources"]:
                lines.append(f"    {s['value'] + s['bias_share']:+.6f}  from {s['rule']}")
        lines.append("")
        lines.append("== Score contributions ==")
        for s in self.score_rows:
            lines.append(f"{s['rule']}  [contribution {s['value'] + s['bias_share']:+.6f}]")
        lines.append(f"total score = {self.logit:+.6f}")
        lines.append(f"predicted: {self.predicted_label}")
        if self.positive_class_note:
            lines.append(self.positive_class_note)
        return "\n".join(lines)


def report(params: LeurnParams, cfg: LeurnConfig, x_raw, preprocessor) -> ExplanationReport:
    """Full per-sample explanation in raw units."""
    x_std = preprocessor.transform_row(x_raw)
    region, trace = extract_region(
        params, cfg, x_std, stats=preprocessor.stats(),
        data_bounds=preprocessor.std_bounds())
    simplified = simplify(region)
    redundant = {(e.layer, e.feature) for e in region.entries if e.redundant}
    contribs = contributions(params, cfg, trace, redundant=redundant)
    merged = merge_redundant(contribs, region)
    names = preprocessor.feature_names()
    kinds = preprocessor.feature_kinds()
    levels = preprocessor.feature_levels()
    mu, sigma = preprocessor.stats()

    rendered: dict[tuple[int, int], str] = {}
    rule_rows = []
    for e in simplified.entries:
        lo_raw = mu[e.feature] + sigma[e.feature] * e.lower
        hi_raw = mu[e.feature] + sigma[e.feature] * e.upper
        text = render_rule(names[e.feature], lo_raw, hi_raw,
                           kind=kinds[e.feature], level=levels[e.feature])
        rendered[(e.layer, e.feature)] = text
        rule_rows.append({"layer": e.layer, "feature": names[e.feature],
                          "feature_index": e.feature, "bin": e.bin,
                          "lower_raw": lo_raw, "upper_raw": hi_raw,
                          "lower_std": e.lower, "upper_std": e.upper,
                          "text": text, "category_bias": e.category_bias})

    def rule_label(layer, feature):
        return rendered.get((layer, feature),
                            f"rule(layer {layer}, {names[feature]})")

    threshold_rows = []
    for j in range(1, cfg.depth + 1):
        for f in range(cfg.n_features):
            sources = [
                {"rule": f"layer {c.src_layer}: {rule_label(c.src_layer, c.src_feature)}",
                 "value": c.value, "bias_share": c.bias_share}
                for c in merged
                if c.target == "threshold" and c.tgt_layer == j and c.tgt_index == f]
            threshold_rows.append({
                "layer": j, "feature": names[f],
                "total": float(trace.taus[j][f]), "sources": sources})

    if cfg.task == "multiclass":
        c_star = int(np.argmax(trace.logits))
    else:
        c_star = 0
    score_rows = [
        {"rule": f"layer {c.src_layer}: {rule_label(c.src_layer, c.src_feature)}",
         "value": c.value, "bias_share": c.bias_share}
        for c in merged
        if c.target == "output" and c.tgt_index == c_star]
    outputs = activate(trace.logits, cfg)
    predicted_label = preprocessor.output_label(outputs, cfg)
    note = None
    if cfg.task == "binary":
        note = (f"positive score favors class "
                f"{preprocessor.positive_class_name()}")
    elif cfg.task == "multiclass":
        note = f"contributions shown for predicted class {predicted_label}"
    return ExplanationReport(
        rule_rows=rule_rows, threshold_rows=threshold_rows, score_rows=score_rows,
        logit=float(trace.logits[c_star]), outputs=[float(v) for v in outputs],
        predicted_label=predicted_label, positive_class_note=note,
        feature_names=list(names))


# ---------------------------------------------------------------------------
# global importance and selection

def feature_importance(params: LeurnParams, cfg: LeurnConfig, X: np.ndarray,
                       feature_names: list[str] | None = None,
                       backend=None) -> ImportanceTable:
    """Mean |sum of head-layer terms| per feature over a standardized dataset.

    Multiclass models attribute against each sample's predicted class.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cfg.n_features:
        raise DataError(f"X shape {X.shape}, expected (*, {cfg.n_features})")
    if X.shape[0] == 0:
        raise DataError("feature_importance needs a non-empty dataset")
    be = kernel.get_backend(None) if backend is None else backend
    logits, cache = be.batch_forward(X, params.tau0, params.rule_weights,
                                     params.rule_biases, params.head_weight,
                                     params.head_bias, cfg.regions, False, None)
    e_cat = cache[0]
    if cfg.task == "multiclass":
        c_star = logits.argmax(axis=1)
        w = params.head_weight.T[c_star]          # (B, (d+1)n)
    else:
        w = params.head_weight[:, 0][None, :]
    terms = e_cat * w
    B = X.shape[0]
    per_feature = terms.reshape(B, cfg.depth + 1, cfg.n_features).sum(axis=1)
    scores = np.abs(per_feature).mean(axis=0)
    return ImportanceTable(scores=scores, normalizer=float(scores.sum()),
                           feature_names=feature_names)


def feature_selection(params: LeurnParams, layer: int, tol: float) -> np.ndarray:
    """Which features still carry weight into the given layer.

    Layers 0..depth-1 index the threshold-producing connections; layer depth
    is the head. A feature is unselected when every weight attached to its
    embedding entries has magnitude <= tol.
    """
    n = params.tau0.shape[0]
    d = len(params.rule_weights)
    if not 0 <= layer <= d:
        raise ConfigError(f"layer must be in [0, {d}], got {layer}")
    if tol < 0:
        raise ConfigError(f"tol must be >= 0, got {tol}")
    w = params.head_weight if layer == d else params.rule_weights[layer]
    selected = np.zeros(n, dtype=bool)
    for f in range(n):
        rows = np.abs(w[f::n, :])
        selected[f] = rows.max() > tol
    return selected
