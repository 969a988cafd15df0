"""Timing harness: compiled kernel vs NumPy fallback on training workloads."""
import argparse
import math
import time

import numpy as np

from leurn.kernel import available_backends, get_backend
from leurn.model import LeurnConfig, init_params
from leurn.train import TrainConfig, fit

SHAPES = [
    # batch, features, depth, k
    (128, 2, 2, 5),
    (128, 12, 3, 10),
    (256, 30, 5, 20),
    (1024, 61, 10, 10),
]


def time_step(be, cfg, params, X, repeats):
    """Best-of-N wall time for one batch forward+backward pass."""
    dlogits = np.full((X.shape[0], cfg.output_dim), 1.0 / X.shape[0])

    def step():
        logits, cache = be.batch_forward(
            X, params.tau0, params.rule_weights, params.rule_biases,
            params.head_weight, params.head_bias, cfg.regions, False, None)
        be.batch_backward(cache, dlogits)
        return logits

    logits = step()
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        step()
        best = min(best, time.perf_counter() - t0)
    return best, logits


def bench_steps(repeats):
    rows = []
    for B, n, d, k in SHAPES:
        cfg = LeurnConfig(n_features=n, depth=d, regions=k, task="binary",
                          seed=0)
        params = init_params(cfg, seed=0)
        X = np.random.default_rng(0).normal(size=(B, n))
        times, logits = {}, {}
        for name in available_backends():
            times[name], logits[name] = time_step(get_backend(name), cfg,
                                                  params, X, repeats)
        row = {"batch": B, "features": n, "depth": d, "k": k, "times": times}
        if "c" in times and "python" in times:
            row["speedup"] = times["python"] / times["c"]
            row["max_diff"] = float(np.abs(logits["c"] - logits["python"]).max())
        rows.append(row)
    return rows


def bench_fit(epochs):
    """End-to-end training time on a synthetic binary problem."""
    rng = np.random.default_rng(1)
    X = rng.normal(size=(4000, 10))
    y = (X[:, 0] * X[:, 1] > 0).astype(np.int64)
    Xv = rng.normal(size=(800, 10))
    yv = (Xv[:, 0] * Xv[:, 1] > 0).astype(np.int64)
    cfg = LeurnConfig(n_features=10, depth=5, regions=10, task="binary",
                      seed=0)
    tcfg = TrainConfig(lr=3e-3, batch_size=128, max_epochs=epochs,
                       patience=epochs, seed=0, metric="accuracy")
    out = {}
    for name in available_backends():
        t0 = time.perf_counter()
        _, rep = fit(cfg, tcfg, (X, y), (Xv, yv), backend=get_backend(name))
        out[name] = (time.perf_counter() - t0, float(rep.best_metric))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=30,
                    help="timed repetitions per shape (best is reported)")
    ap.add_argument("--epochs", type=int, default=10,
                    help="epochs for the end-to-end fit comparison")
    ap.add_argument("--skip-fit", action="store_true",
                    help="only run the per-step microbenchmark")
    args = ap.parse_args(argv)
    names = available_backends()
    print(f"backends: {', '.join(names)}")

    print("\nper-step forward+backward (best of "
          f"{args.repeats}, milliseconds)")
    cols = "".join(f"{n + ' ms':>12}" for n in names)
    print(f"{'batch':>6}{'feat':>6}{'depth':>6}{'k':>4}{cols}"
          f"{'speedup':>9}{'max diff':>11}")
    for row in bench_steps(args.repeats):
        t = "".join(f"{row['times'][n] * 1e3:12.3f}" for n in names)
        s = f"{row['speedup']:9.2f}" if "speedup" in row else f"{'-':>9}"
        d = f"{row['max_diff']:11.2e}" if "max_diff" in row else f"{'-':>11}"
        print(f"{row['batch']:>6}{row['features']:>6}{row['depth']:>6}"
              f"{row['k']:>4}{t}{s}{d}")

    if not args.skip_fit:
        print(f"\nfull fit, 4000x10 binary rows, d=5 k=10, "
              f"{args.epochs} epochs")
        for name, (secs, best) in bench_fit(args.epochs).items():
            print(f"  {name:>7}: {secs:7.2f} s  (best val accuracy {best:.3f})")


if __name__ == "__main__":
    main()
