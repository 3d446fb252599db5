"""Quantile feature binning for histogram split finding.

Each feature gets at most max_bins ordinal codes.  When a feature has no
more distinct values than bins, boundaries sit halfway between adjacent
distinct values, so histogram split search degenerates to the exact
exhaustive search over that feature.  Otherwise boundaries come from
empirical quantiles, which keeps bin populations near-uniform.

A code b means x <= edges[b] (and x > edges[b-1] for b > 0); a split at
boundary b therefore routes x <= edges[b] to the left child, matching
the real-valued threshold stored in grown trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SchemaError

MAX_BINS_HARD = 255  # codes must fit uint8


@dataclass
class BinMapper:
    edges: list  # per feature: ascending upper boundaries, len n_bins - 1

    @property
    def n_features(self) -> int:
        return len(self.edges)

    def n_bins(self) -> np.ndarray:
        return np.array([e.size + 1 for e in self.edges], dtype=np.int64)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise SchemaError(f"expected (n, {self.n_features}) matrix")
        codes = np.empty(x.shape, dtype=np.uint8)
        for f, edges in enumerate(self.edges):
            codes[:, f] = np.searchsorted(edges, x[:, f], side="left")
        return np.ascontiguousarray(codes)


def fit_bins(x, max_bins: int = MAX_BINS_HARD) -> BinMapper:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise SchemaError("need a non-empty (n, f) matrix to fit bins")
    if not 2 <= max_bins <= MAX_BINS_HARD:
        raise SchemaError(f"max_bins must be in [2, {MAX_BINS_HARD}]")
    if not np.isfinite(x).all():
        raise SchemaError("features must be finite to fit bins")
    edges = []
    for f in range(x.shape[1]):
        col = x[:, f]
        distinct = np.unique(col)
        if distinct.size <= max_bins:
            e = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            qs = np.quantile(col, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            e = np.unique(qs)
        edges.append(np.asarray(e, dtype=np.float64))
    return BinMapper(edges)
