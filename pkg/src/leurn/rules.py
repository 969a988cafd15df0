"""Decision-region extraction: the rules one sample activates, exactly.

Each layer places every feature in one of k tanh-space bins, which maps to an
input-space interval [atanh(edge) - tau, atanh(next edge) - tau). The region a
sample occupies is the per-feature intersection across layers; the model
output is constant on that region and can be recomputed from bin indices
alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError
from .model import (ForwardTrace, LeurnConfig, LeurnParams, activate, bin_edge,
                    forward, replay_from_bins)


@dataclass
class RuleEntry:
    """One (layer, feature) bin interval in standardized input units.

    Intervals are lower-closed/upper-open, matching the quantizer's
    boundary-to-upper-bin tie-break.
    """

    layer: int
    feature: int
    bin: int
    lower: float
    upper: float
    redundant: bool = False
    absorbed_by: int | None = None   # layer of the entry that absorbs this one
    category_bias: bool = False      # interval spans the whole training range


@dataclass
class Region:
    """Per-feature interval intersection plus the provenance that built it."""

    lower: np.ndarray
    upper: np.ndarray
    raw_lower: np.ndarray
    raw_upper: np.ndarray
    bins: np.ndarray
    entries: list[RuleEntry] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.lower.shape[0]


def _interval_for_bin(b: int, k: int, tau_f: float) -> tuple[float, float]:
    lo = -math.inf if b == 0 else math.atanh(bin_edge(b, k)) - tau_f
    hi = math.inf if b == k - 1 else math.atanh(bin_edge(b + 1, k)) - tau_f
    return lo, hi


def extract_region(params: LeurnParams, cfg: LeurnConfig, x_std: np.ndarray,
                   stats: tuple[np.ndarray, np.ndarray] | None = None,
                   data_bounds: tuple[np.ndarray, np.ndarray] | None = None,
                   ) -> tuple[Region, ForwardTrace]:
    """Region containing x_std and the forward trace that produced it.

    stats is (mu, sigma) for raw-unit bounds; without it raw equals
    standardized. data_bounds is the standardized training min/max per
    feature and switches on category-bias flagging.
    """
    trace = forward(params, cfg, x_std)
    n = cfg.n_features
    k = cfg.regions
    lower = np.full(n, -math.inf)
    upper = np.full(n, math.inf)
    entries: list[RuleEntry] = []
    lower_def = [None] * n
    upper_def = [None] * n
    for j in range(cfg.depth + 1):
        tau = trace.taus[j]
        for f in range(n):
            b = int(trace.bins[j, f])
            lo, hi = _interval_for_bin(b, k, float(tau[f]))
            entry = RuleEntry(layer=j, feature=f, bin=b, lower=lo, upper=hi)
            if lo <= lower[f] and hi >= upper[f]:
                entry.redundant = True
                # absorb into whichever binding bound this entry is slacker on
                cands = []
                if lo > -math.inf and lower_def[f] is not None:
                    cands.append((lower[f] - lo, lower_def[f]))
                if hi < math.inf and upper_def[f] is not None:
                    cands.append((hi - upper[f], upper_def[f]))
                if cands:
                    entry.absorbed_by = min(cands)[1]
            else:
                if lo > lower[f]:
                    lower[f] = lo
                    lower_def[f] = j
                if hi < upper[f]:
                    upper[f] = hi
                    upper_def[f] = j
            entries.append(entry)
    if data_bounds is not None:
        dmin, dmax = data_bounds
        for e in entries:
            if e.lower <= float(dmin[e.feature]) and e.upper >= float(dmax[e.feature]):
                e.category_bias = True
    if stats is not None:
        mu, sigma = np.asarray(stats[0], dtype=np.float64), np.asarray(stats[1], dtype=np.float64)
        raw_lower = mu + sigma * lower
        raw_upper = mu + sigma * upper
    else:
        raw_lower = lower.copy()
        raw_upper = upper.copy()
    region = Region(lower=lower, upper=upper, raw_lower=raw_lower,
                    raw_upper=raw_upper, bins=trace.bins.copy(), entries=entries)
    return region, trace


def simplify(region: Region) -> Region:
    """Drop redundant entries from the presented rule list.

    Entries flagged only as category bias stay listed (they may be the sole
    constraint on a feature); the region bounds never change.
    """
    kept = [e for e in region.entries if not e.redundant]
    return Region(lower=region.lower.copy(), upper=region.upper.copy(),
                  raw_lower=region.raw_lower.copy(), raw_upper=region.raw_upper.copy(),
                  bins=region.bins.copy(), entries=kept)


def region_output(params: LeurnParams, cfg: LeurnConfig, region: Region) -> np.ndarray:
    """Model output for any point in the region, from stored bins alone."""
    bins = np.asarray(region.bins)
    if bins.shape != (cfg.depth + 1, cfg.n_features):
        raise ShapeError(f"region bins shape {bins.shape} does not match a "
                         f"depth-{cfg.depth}, {cfg.n_features}-feature model")
    trace = replay_from_bins(params, cfg, bins)
    return activate(trace.logits, cfg)


def generate(region: Region, rng: np.random.Generator,
             data_bounds: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Sample a raw-unit point uniformly from the region clipped to data bounds.

    data_bounds is the training-set per-feature (min, max) in raw units.
    """
    dmin = np.asarray(data_bounds[0], dtype=np.float64)
    dmax = np.asarray(data_bounds[1], dtype=np.float64)
    n = region.n_features
    if dmin.shape != (n,) or dmax.shape != (n,):
        raise ShapeError(f"data bounds must have shape ({n},)")
    out = np.empty(n)
    for f in range(n):
        lo = max(float(region.raw_lower[f]), float(dmin[f]))
        hi = min(float(region.raw_upper[f]), float(dmax[f]))
        if lo > hi:
            raise DataError(
                f"region for feature {f} is empty after clipping to data "
                f"bounds: [{region.raw_lower[f]}, {region.raw_upper[f]}) vs "
                f"[{dmin[f]}, {dmax[f]}]")
        out[f] = rng.uniform(lo, hi)
    return out
