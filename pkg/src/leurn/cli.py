"""Command-line interface: train, search, predict, explain, inspect, sample."""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import bundle as bundle_mod
from . import data as data_mod
from . import explain as explain_mod
from . import hpo as hpo_mod
from . import rules as rules_mod
from . import similarity as sim_mod
from . import train as train_mod
from .errors import BundleError, DataError, LeurnError
from .model import LeurnConfig
from .numeric import derive_seeds, rng_from_seed


def _write_csv(path, header, rows):
    if path is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


def _read_feature_columns(path: str, pre) -> dict:
    """Columns keyed by source name; missing cells become None."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if not rows:
        raise DataError(f"{path} is empty")
    header = rows[0]
    body = rows[1:]
    if not body:
        raise DataError(f"{path} has no data rows")
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"row {i + 1} has {len(row)} cells, "
                            f"expected {len(header)}")
    cols = {}
    for src in pre.source_order:
        if src not in header:
            raise DataError(f"column {src!r} missing from {path}")
        ci = header.index(src)
        cols[src] = [row[ci] if row[ci] != "" else None for row in body]
    return cols


def _resolve_row(args, pre) -> dict:
    """One raw row from --row: either an index into --data or a literal CSV row."""
    text = args.row
    stripped = text.strip()
    if stripped.lstrip("-").isdigit():
        if not getattr(args, "data", None):
            raise DataError("--row given as an index requires --data")
        cols = _read_feature_columns(args.data, pre)
        n = len(next(iter(cols.values())))
        idx = int(stripped)
        if not 0 <= idx < n:
            raise DataError(f"row index {idx} out of range [0, {n - 1}]")
        return {src: cols[src][idx] for src in pre.source_order}
    cells = next(csv.reader([text]))
    if len(cells) != len(pre.source_order):
        raise DataError(f"literal row has {len(cells)} cells, expected "
                        f"{len(pre.source_order)} ({pre.source_order})")
    return {src: (c if c != "" else None)
            for src, c in zip(pre.source_order, cells)}


def _train_seeds(seed: int) -> tuple[int, int, int]:
    s = derive_seeds((seed, 3), 3)
    return s[0], s[1], s[2]


# ---------------------------------------------------------------------------
# subcommands

def cmd_train(args) -> int:
    td = data_mod.load_csv(args.data, args.target, task=args.task)
    split_seed, init_seed, train_seed = _train_seeds(args.seed)
    assignment = data_mod.split(td.n_rows, seed=split_seed,
                                labels=td.class_labels())
    prep = data_mod.fit_transform(td, assignment)
    n_classes = (len(td.schema.target_levels)
                 if td.task == "multiclass" else None)
    cfg = LeurnConfig(n_features=prep.pre.n_features, depth=args.d,
                      regions=args.k, dropout=args.r, task=td.task,
                      n_classes=n_classes, seed=init_seed)
    tcfg = train_mod.TrainConfig(lr=args.lr, batch_size=args.batch,
                                 max_epochs=args.epochs, patience=args.patience,
                                 seed=train_seed, metric=args.metric)
    params, report = train_mod.fit(cfg, tcfg, prep.train, prep.val)
    X_te, y_te = prep.test
    test_metric = None
    if X_te.shape[0]:
        test_metric = train_mod.evaluate(params, cfg, X_te, y_te,
                                         metric=report.metric_name)
    index = None
    if args.index:
        index = sim_mod.build_index(params, cfg, prep.train[0])
    provenance = {"seed": args.seed, "split_seed": split_seed,
                  "init_seed": init_seed, "train_seed": train_seed,
                  "metric_name": report.metric_name,
                  "best_val_metric": report.best_metric,
                  "best_epoch": report.best_epoch,
                  "epochs_run": report.epochs_run,
                  "test_metric": test_metric, "backend": report.backend}
    mb = bundle_mod.ModelBundle(config=cfg, params=params, preprocessor=prep.pre,
                                schema=td.schema, index=index,
                                provenance=provenance)
    bundle_mod.save_bundle(mb, args.out)
    msg = f"trained d={args.d} k={args.k} r={args.r}: " \
          f"val {report.metric_name}={report.best_metric:.6f}"
    if test_metric is not None:
        msg += f", test {report.metric_name}={test_metric:.6f}"
    print(msg + f" -> {args.out}")
    return 0


def cmd_hpo(args) -> int:
    td = data_mod.load_csv(args.data, args.target, task=args.task)
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                spec = hpo_mod.SearchSpec.from_dict(json.load(fh))
        except OSError as e:
            raise DataError(f"cannot read spec file {args.spec}: {e}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"spec file {args.spec} is not valid JSON: {e}") from e
    else:
        spec = hpo_mod.SearchSpec()
    if args.seed is not None:
        spec.seed = args.seed
    tcfg = train_mod.TrainConfig(lr=args.lr, batch_size=args.batch,
                                 max_epochs=args.epochs, patience=args.patience,
                                 metric=args.metric)
    result = hpo_mod.search(td, spec, tcfg=tcfg)
    final = hpo_mod.final_protocol(td, result.best, runs=spec.final_runs,
                                   tcfg=tcfg, seed=spec.seed)
    result.final = final.to_dict()
    doc = result.to_dict()
    doc["spec"] = spec.to_dict()
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    d, k, r = result.best
    print(f"best config: d={d} k={k} r={r}")
    print(f"final {final.metric_name}: mean={final.mean:.6f} "
          f"std={final.std:.6f} over {len(final.per_run)} runs -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    cols = _read_feature_columns(args.data, mb.preprocessor)
    X = mb.preprocessor.transform_raw_columns(cols)
    out = train_mod.predict_batch(mb.params, mb.config, X)
    cfg = mb.config
    if cfg.task == "multiclass":
        levels = mb.schema.target_levels
        header = ["prediction"] + [f"p_{lv}" for lv in levels]
        rows = [[levels[int(np.argmax(out[i]))]] + [_fmt(v) for v in out[i]]
                for i in range(out.shape[0])]
    else:
        header = ["prediction"]
        rows = [[_fmt(out[i, 0])] for i in range(out.shape[0])]
    _write_csv(args.out, header, rows)
    return 0


def cmd_evaluate(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    td = data_mod.load_csv(args.data, mb.schema.target, task=mb.schema.task)
    X = mb.preprocessor.transform(td)
    y = mb.preprocessor.encode_target(td.target)
    metric = train_mod.DEFAULT_METRIC[mb.config.task]
    value = train_mod.evaluate(mb.params, mb.config, X, y, metric=metric)
    print(f"{metric} = {value:.6f}")
    return 0


def cmd_explain(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    row = _resolve_row(args, mb.preprocessor)
    rep = explain_mod.report(mb.params, mb.config, row, mb.preprocessor)
    if args.format == "structured":
        print(json.dumps(rep.to_dict()))
    else:
        print(rep.to_text())
    return 0


def cmd_importance(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    cols = _read_feature_columns(args.data, mb.preprocessor)
    X = mb.preprocessor.transform_raw_columns(cols)
    table = explain_mod.feature_importance(
        mb.params, mb.config, X, feature_names=mb.preprocessor.feature_names())
    rows = [[name, _fmt(score)]
            for name, score in zip(table.feature_names, table.scores)]
    _write_csv(args.out, ["feature", "importance"], rows)
    return 0


def cmd_region(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    pre = mb.preprocessor
    row = _resolve_row(args, pre)
    x_std = pre.transform_row(row)
    region, _ = rules_mod.extract_region(mb.params, mb.config, x_std,
                                         stats=pre.stats(),
                                         data_bounds=pre.std_bounds())
    names = pre.feature_names()
    print("feature bounds (raw units; standardized in brackets):")
    for f in range(region.n_features):
        print(f"  {names[f]}: [{region.raw_lower[f]:.6g}, "
              f"{region.raw_upper[f]:.6g})  "
              f"[std {region.lower[f]:.6g}, {region.upper[f]:.6g})")
    print("rule trace:")
    for e in region.entries:
        flags = []
        if e.redundant:
            flags.append(f"redundant, absorbed by layer {e.absorbed_by}")
        if e.category_bias:
            flags.append("category bias: spans training range")
        suffix = f"  [{'; '.join(flags)}]" if flags else ""
        print(f"  layer {e.layer} {names[e.feature]}: bin {e.bin}, "
              f"[{e.lower:.6g}, {e.upper:.6g}) std{suffix}")
    return 0


def cmd_generate(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    pre = mb.preprocessor
    row = _resolve_row(args, pre)
    x_std = pre.transform_row(row)
    region, _ = rules_mod.extract_region(mb.params, mb.config, x_std,
                                         stats=pre.stats(),
                                         data_bounds=pre.std_bounds())
    rng = rng_from_seed(args.seed)
    bounds = pre.raw_bounds()
    rows = []
    for _ in range(args.count):
        sample = rules_mod.generate(region, rng, bounds)
        rows.append([_fmt(v) for v in sample])
    _write_csv(args.out, pre.feature_names(), rows)
    return 0


def cmd_similar(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    pre = mb.preprocessor

    class RowArgs:
        pass

    def resolve(text):
        ra = RowArgs()
        ra.row = text
        ra.data = args.data
        return _resolve_row(ra, pre)

    a = pre.transform_row(resolve(args.row_a))
    b = pre.transform_row(resolve(args.row_b))
    ea = sim_mod.embed(mb.params, mb.config, a)
    eb = sim_mod.embed(mb.params, mb.config, b)
    gamma = mb.index.gamma if mb.index else sim_mod.default_gamma(mb.config)
    print(_fmt(sim_mod.rbf_similarity(ea, eb, gamma)))
    return 0


def cmd_confidence(args) -> int:
    mb = bundle_mod.load_bundle(args.model)
    if mb.index is None:
        raise BundleError("bundle has no embedding index; retrain with --index "
                          "to enable confidence scoring")
    cols = _read_feature_columns(args.data, mb.preprocessor)
    X = mb.preprocessor.transform_raw_columns(cols)
    conf = sim_mod.confidence_batch(mb.params, mb.config, mb.index, X)
    _write_csv(args.out, ["confidence"], [[_fmt(c)] for c in conf])
    return 0


def cmd_toydata(args) -> int:
    if args.kind != "halfmoon":
        raise DataError(f"unknown toy dataset kind {args.kind!r}")
    X, y = data_mod.half_moon(args.n, noise=args.noise,
                              rotation_deg=args.rotation,
                              n_noise_features=args.noise_features,
                              seed=args.seed)
    names = ["x0", "x1"] + [f"noise{i}" for i in range(args.noise_features)]
    data_mod.save_csv(args.out, X, y, names, target_name="label")
    print(f"wrote {X.shape[0]} rows -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="leurn",
        description="Train and inspect rule-based tabular neural networks")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a model and save a bundle")
    t.add_argument("--data", required=True)
    t.add_argument("--target", required=True)
    t.add_argument("--task", choices=["binary", "multiclass", "regression"])
    t.add_argument("--d", type=int, default=2)
    t.add_argument("--k", type=int, default=5)
    t.add_argument("--r", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--epochs", type=int, default=300)
    t.add_argument("--batch", type=int, default=128)
    t.add_argument("--patience", type=int, default=30)
    t.add_argument("--metric", choices=["auroc", "accuracy", "rmse"])
    t.add_argument("--index", action="store_true",
                   help="store a training-set embedding index in the bundle")
    t.add_argument("--out", default="model.json")
    t.set_defaults(func=cmd_train)

    h = sub.add_parser("hpo", help="sequential search plus final protocol")
    h.add_argument("--data", required=True)
    h.add_argument("--target", required=True)
    h.add_argument("--task", choices=["binary", "multiclass", "regression"])
    h.add_argument("--spec", help="JSON file overriding SearchSpec fields")
    h.add_argument("--seed", type=int, help="overrides the spec file seed")
    h.add_argument("--lr", type=float, default=1e-3)
    h.add_argument("--epochs", type=int, default=300)
    h.add_argument("--batch", type=int, default=128)
    h.add_argument("--patience", type=int, default=30)
    h.add_argument("--metric", choices=["auroc", "accuracy", "rmse"])
    h.add_argument("--out", default="search_log.json")
    h.set_defaults(func=cmd_hpo)

    pr = sub.add_parser("predict", help="per-row predictions for a CSV")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("evaluate", help="task metric on a labeled CSV")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.set_defaults(func=cmd_evaluate)

    ex = sub.add_parser("explain", help="per-sample explanation report")
    ex.add_argument("--model", required=True)
    ex.add_argument("--row", required=True,
                    help="row index (with --data) or a literal CSV row of features")
    ex.add_argument("--data")
    ex.add_argument("--format", choices=["text", "structured"], default="text")
    ex.set_defaults(func=cmd_explain)

    im = sub.add_parser("importance", help="global feature importance CSV")
    im.add_argument("--model", required=True)
    im.add_argument("--data", required=True)
    im.add_argument("--out")
    im.set_defaults(func=cmd_importance)

    rg = sub.add_parser("region", help="decision region for one row")
    rg.add_argument("--model", required=True)
    rg.add_argument("--row", required=True)
    rg.add_argument("--data")
    rg.set_defaults(func=cmd_region)

    ge = sub.add_parser("generate", help="sample rows from one row's region")
    ge.add_argument("--model", required=True)
    ge.add_argument("--row", required=True)
    ge.add_argument("--data")
    ge.add_argument("--count", type=int, default=10)
    ge.add_argument("--seed", type=int, default=0)
    ge.add_argument("--out")
    ge.set_defaults(func=cmd_generate)

    si = sub.add_parser("similar", help="embedding similarity of two rows")
    si.add_argument("--model", required=True)
    si.add_argument("--row-a", required=True)
    si.add_argument("--row-b", required=True)
    si.add_argument("--data")
    si.set_defaults(func=cmd_similar)

    co = sub.add_parser("confidence", help="per-row confidence vs training index")
    co.add_argument("--model", required=True)
    co.add_argument("--data", required=True)
    co.add_argument("--out")
    co.set_defaults(func=cmd_confidence)

    toy = sub.add_parser("toydata", help="write a synthetic dataset CSV")
    toy.add_argument("--kind", default="halfmoon")
    toy.add_argument("--n", type=int, default=1000)
    toy.add_argument("--noise", type=float, default=0.1)
    toy.add_argument("--rotation", type=float, default=0.0)
    toy.add_argument("--noise-features", type=int, default=0)
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--out", required=True)
    toy.set_defaults(func=cmd_toydata)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LeurnError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: OSError: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
