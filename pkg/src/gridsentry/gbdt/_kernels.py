"""Hot loops of the tree learner, jitted and strictly sequential.

Everything here is single-threaded on purpose: results must not depend
on a parallelism degree, and at desk scale the sequential kernels are
already far from the bottleneck.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def fill_histograms(codes, rows, g, h, n_features, n_bins):
    """Per-feature (grad, hess, count) histograms over the given rows."""
    hg = np.zeros((n_features, n_bins), dtype=np.float64)
    hh = np.zeros((n_features, n_bins), dtype=np.float64)
    hc = np.zeros((n_features, n_bins), dtype=np.int64)
    for ridx in range(rows.shape[0]):
        r = rows[ridx]
        gr = g[r]
        hr = h[r]
        for f in range(n_features):
            b = codes[r, f]
            hg[f, b] += gr
            hh[f, b] += hr
            hc[f, b] += 1
    return hg, hh, hc


@njit(cache=True)
def apply_tree(x, feature, threshold, left, right):
    """Leaf index for every row of x; feature < 0 marks a leaf node."""
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def predict_forest(x, feature, threshold, left, right, value,
                   roots, tree_class, base, out):
    """Sum leaf values of a flattened forest into per-class raw scores."""
    n = x.shape[0]
    for i in range(n):
        for k in range(base.shape[0]):
            out[i, k] = base[k]
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if x[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i, tree_class[t]] += value[node]
    return out
