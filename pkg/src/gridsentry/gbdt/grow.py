"""Leaf-wise growth of a single regression tree on binned features.

The frontier is a max-heap keyed on split gain; the best leaf splits
first until the leaf budget is exhausted or no split has positive gain.
Gain and leaf values are the usual second-order expressions

    gain = G_L^2/(H_L + lam) + G_R^2/(H_R + lam) - G^2/(H + lam)
    leaf = -G/(H + lam) * learning_rate

with ties broken toward the lowest feature index, then the lowest bin
boundary.  Sibling histograms are obtained by subtraction, so each split
only scans the smaller child.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ._kernels import apply_tree, fill_histograms


@dataclass
class Tree:
    """Flat node arrays in creation order; node 0 is the root."""

    feature: np.ndarray    # int32, -1 for leaves
    threshold: np.ndarray  # float64 split value, x <= threshold goes left
    gain: np.ndarray       # float64 split gain, 0 for leaves
    left: np.ndarray       # int32 child ids, -1 for leaves
    right: np.ndarray
    value: np.ndarray      # float64 leaf values, 0 for internal nodes

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def apply(self, x) -> np.ndarray:
        return apply_tree(np.ascontiguousarray(x, dtype=np.float64),
                          self.feature, self.threshold, self.left, self.right)

    def predict(self, x) -> np.ndarray:
        return self.value[self.apply(x)]


def best_split(hg, hh, hc, total_g, total_h, total_n,
               lambda_l2, min_samples_leaf, allowed=None):
    """Best (gain, feature, bin) over all boundaries, or None.

    A boundary b sends codes <= b left.  Both children must keep at least
    min_samples_leaf rows.  The arrays are (n_features, n_bins) histograms.
    """
    gl = np.cumsum(hg[:, :-1], axis=1)
    hl = np.cumsum(hh[:, :-1], axis=1)
    cl = np.cumsum(hc[:, :-1], axis=1)
    gr = total_g - gl
    hr = total_h - hl
    cr = total_n - cl
    ok = (cl >= min_samples_leaf) & (cr >= min_samples_leaf)
    if allowed is not None:
        ok &= np.asarray(allowed, dtype=bool)[:, None]
    if not ok.any():
        return None
    parent = total_g * total_g / (total_h + lambda_l2)
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = (gl * gl / (hl + lambda_l2)
                 + gr * gr / (hr + lambda_l2) - parent)
    gains[~ok] = -np.inf
    gains[~np.isfinite(gains)] = -np.inf
    flat = int(np.argmax(gains))  # first max in C order: lowest feature, lowest bin
    f, b = divmod(flat, gains.shape[1])
    g = float(gains[f, b])
    if not np.isfinite(g) or g <= 0.0:
        return None
    return g, int(f), int(b)


def grow_tree(codes, edges, g, h, rows, *, num_leaves, min_samples_leaf,
              lambda_l2, learning_rate, allowed=None) -> Tree:
    """Fit one tree to gradients g and hessians h over the given row set."""
    n_features = codes.shape[1]
    n_bins = int(max(e.size + 1 for e in edges)) if edges else 1
    rows = np.asarray(rows, dtype=np.int64)

    feature, threshold, gain = [], [], []
    left, right = [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        gain.append(0.0)
        left.append(-1)
        right.append(-1)
        return len(feature) - 1

    def node_stats(hist):
        hg = hist[0]
        return float(hg[0].sum()) if n_features else 0.0, float(hist[1][0].sum())

    pending = {}

    def open_node(node_rows, hist):
        nid = new_node()
        tg, th = node_stats(hist)
        cand = None
        if node_rows.size >= 2 * min_samples_leaf:
            cand = best_split(hist[0], hist[1], hist[2], tg, th,
                              node_rows.size, lambda_l2, min_samples_leaf, allowed)
        pending[nid] = (node_rows, hist, tg, th, cand)
        return nid, cand

    root_hist = fill_histograms(codes, rows, g, h, n_features, n_bins)
    _, root_cand = open_node(rows, root_hist)

    heap = []
    counter = 0
    if root_cand is not None:
        heapq.heappush(heap, (-root_cand[0], counter, 0))
        counter += 1

    n_leaves = 1
    while heap and n_leaves < num_leaves:
        _, _, nid = heapq.heappop(heap)
        node_rows, hist, _, _, cand = pending.pop(nid)
        split_gain, f, b = cand
        go_left = codes[node_rows, f] <= b
        left_rows = node_rows[go_left]
        right_rows = node_rows[~go_left]

        # scan the smaller child, derive the other by subtraction
        if left_rows.size <= right_rows.size:
            small_rows, big_rows = left_rows, right_rows
        else:
            small_rows, big_rows = right_rows, left_rows
        small_hist = fill_histograms(codes, small_rows, g, h, n_features, n_bins)
        big_hist = (hist[0] - small_hist[0], hist[1] - small_hist[1],
                    hist[2] - small_hist[2])
        lh, rh = ((small_hist, big_hist) if small_rows is left_rows
                  else (big_hist, small_hist))

        lid, lcand = open_node(left_rows, lh)
        rid, rcand = open_node(right_rows, rh)
        feature[nid] = f
        threshold[nid] = float(edges[f][b])
        gain[nid] = split_gain
        left[nid] = lid
        right[nid] = rid
        if lcand is not None:
            heapq.heappush(heap, (-lcand[0], counter, lid))
            counter += 1
        if rcand is not None:
            heapq.heappush(heap, (-rcand[0], counter, rid))
            counter += 1
        n_leaves += 1

    value = np.zeros(len(feature), dtype=np.float64)
    for nid, (_, _, tg, th, _) in pending.items():
        value[nid] = -tg / (th + lambda_l2) * learning_rate

    return Tree(feature=np.array(feature, dtype=np.int32),
                threshold=np.array(threshold, dtype=np.float64),
                gain=np.array(gain, dtype=np.float64),
                left=np.array(left, dtype=np.int32),
                right=np.array(right, dtype=np.int32),
                value=value)
