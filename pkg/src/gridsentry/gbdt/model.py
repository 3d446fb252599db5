"""Gradient-boosted ensemble: training loop, prediction, text model files.

Training accepts either hard labels (taken from the table's label
columns) or an explicit target distribution, so the distillation path is
the same code with a different target matrix.  All stochastic choices
(bagging rows, feature subsets) come from one seeded generator and are
skipped entirely when the corresponding fraction is 1.0, which keeps
runs with equal parameters bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, SchemaError
from ..tables import SampleTable
from . import objectives as obj
from ._kernels import predict_forest
from .binning import fit_bins
from .grow import Tree, grow_tree

OBJECTIVES = ("binary", "multiclass")

MODEL_MAGIC = "gridsentry-gbdt"
MODEL_VERSION = 1

PRIOR_CLIP = 1e-15


@dataclass
class GbdtParams:
    objective: str = "multiclass"
    num_class: int = 7
    num_iterations: int = 200
    learning_rate: float = 0.05
    num_leaves: int = 63
    max_bins: int = 255
    min_samples_leaf: int = 20
    lambda_l2: float = 1.0
    feature_fraction: float = 0.9
    bagging_fraction: float = 0.8
    bagging_freq: int = 5
    early_stopping_rounds: int = 20  # 0 disables
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        if self.objective == "multiclass" and self.num_class < 2:
            raise ConfigError("multiclass needs num_class >= 2")
        if self.num_iterations < 0 or self.num_leaves < 2:
            raise ConfigError("need num_iterations >= 0 and num_leaves >= 2")
        if not (0.0 < self.feature_fraction <= 1.0
                and 0.0 < self.bagging_fraction <= 1.0):
            raise ConfigError("fractions must be in (0, 1]")
        if self.learning_rate <= 0 or self.lambda_l2 < 0:
            raise ConfigError("need learning_rate > 0 and lambda_l2 >= 0")
        if self.min_samples_leaf < 1 or self.bagging_freq < 1:
            raise ConfigError("min_samples_leaf and bagging_freq must be >= 1")

    @property
    def trees_per_iteration(self) -> int:
        return self.num_class if self.objective == "multiclass" else 1


@dataclass
class BoostedModel:
    objective: str
    num_class: int           # 1 for binary
    num_features: int
    base_score: np.ndarray   # (num_class,)
    trees: list              # iteration-major, class-minor
    best_iteration: int
    feature_names: tuple = None
    history: list = field(default_factory=list, repr=False)  # (it, train, valid)

    def __post_init__(self):
        self.base_score = np.asarray(self.base_score, dtype=np.float64)
        self._flat = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _flatten(self):
        if self._flat is None:
            if self.trees:
                feature = np.concatenate([t.feature for t in self.trees])
                threshold = np.concatenate([t.threshold for t in self.trees])
                left = np.concatenate([t.left for t in self.trees])
                right = np.concatenate([t.right for t in self.trees])
                value = np.concatenate([t.value for t in self.trees])
                sizes = np.array([t.n_nodes for t in self.trees])
                roots = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
                off = np.repeat(roots, sizes).astype(np.int32)
                feature = feature.copy()
                internal = feature >= 0
                left = (left + off)
                right = (right + off)
                left[~internal] = -1
                right[~internal] = -1
                tree_class = (np.arange(len(self.trees)) % self.num_class).astype(np.int64)
            else:
                feature = np.empty(0, dtype=np.int32)
                threshold = value = np.empty(0, dtype=np.float64)
                left = right = np.empty(0, dtype=np.int32)
                roots = tree_class = np.empty(0, dtype=np.int64)
            self._flat = (feature, threshold,
                          np.ascontiguousarray(left, dtype=np.int32),
                          np.ascontiguousarray(right, dtype=np.int32),
                          value, roots, tree_class)
        return self._flat


def _check_features(model: BoostedModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.num_features:
        raise SchemaError(f"expected {model.num_features} feature columns, "
                          f"got shape {x.shape}")
    return np.ascontiguousarray(x), single


def predict_raw(model: BoostedModel, x) -> np.ndarray:
    """Raw ensemble scores: logit (binary) or per-class logits."""
    x, single = _check_features(model, x)
    feature, threshold, left, right, value, roots, tree_class = model._flatten()
    out = np.empty((x.shape[0], model.num_class), dtype=np.float64)
    predict_forest(x, feature, threshold, left, right, value,
                   roots, tree_class, model.base_score, out)
    if model.objective == "binary":
        out = out[:, 0]
    return out[0] if single else out


def predict_proba(model: BoostedModel, x) -> np.ndarray:
    raw = predict_raw(model, x)
    if model.objective == "binary":
        return obj.sigmoid(raw)
    return obj.softmax(raw)


def predict_class(model: BoostedModel, x) -> np.ndarray:
    p = predict_proba(model, x)
    if model.objective == "binary":
        return (np.asarray(p) >= 0.5).astype(np.int64)
    return np.asarray(p).argmax(axis=-1).astype(np.int64)


def _targets_from_labels(params: GbdtParams, y) -> np.ndarray:
    y = np.asarray(y)
    if params.objective == "binary":
        bad = ~np.isin(y, (0, 1))
        if bad.any():
            raise SchemaError("binary labels must be 0 or 1")
        return y.astype(np.float64)
    yi = y.astype(np.int64)
    if (yi < 0).any() or (yi >= params.num_class).any():
        raise SchemaError(f"labels outside [0, {params.num_class})")
    onehot = np.zeros((y.shape[0], params.num_class), dtype=np.float64)
    onehot[np.arange(y.shape[0]), yi] = 1.0
    return onehot


def _base_score(params: GbdtParams, targets) -> np.ndarray:
    if params.objective == "binary":
        prior = float(np.clip(targets.mean(), PRIOR_CLIP, 1.0 - PRIOR_CLIP))
        return np.array([math.log(prior / (1.0 - prior))])
    prior = np.clip(targets.mean(axis=0), PRIOR_CLIP, None)
    return np.log(prior)


def train_arrays(params: GbdtParams, x, targets, valid_x=None, valid_y=None,
                 feature_names=None, log_path=None) -> BoostedModel:
    """Boost on an explicit feature matrix and target distribution.

    targets: (n,) probabilities for binary, (n, K) row-stochastic for
    multiclass.  valid_y is always hard labels; validation loss drives
    early stopping when enabled.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n, n_features = x.shape
    if targets.shape[0] != n:
        raise SchemaError("targets and features disagree on row count")
    multi = params.objective == "multiclass"
    if multi and targets.shape != (n, params.num_class):
        raise SchemaError(f"multiclass targets must be (n, {params.num_class})")
    if n < 2 * params.min_samples_leaf:
        raise SchemaError("fewer training rows than 2 * min_samples_leaf")

    mapper = fit_bins(x, params.max_bins)
    codes = mapper.transform(x)
    edges = mapper.edges

    base = _base_score(params, targets)
    logits = np.tile(base, (n, 1)) if multi else np.full(n, base[0])

    has_valid = valid_x is not None
    if has_valid:
        valid_x = np.ascontiguousarray(valid_x, dtype=np.float64)
        valid_targets = _targets_from_labels(params, valid_y)
        vlogits = (np.tile(base, (valid_x.shape[0], 1)) if multi
                   else np.full(valid_x.shape[0], base[0]))

    rng = np.random.Generator(np.random.PCG64(params.seed))
    all_rows = np.arange(n, dtype=np.int64)
    n_bag = max(1, int(params.bagging_fraction * n))
    n_feat_sub = max(1, int(math.ceil(params.feature_fraction * n_features)))

    trees = []
    history = []
    bag_rows = all_rows
    best_loss = np.inf
    best_iteration = 0
    stopped = False

    log_fh = open(log_path, "w") if log_path else None
    if log_fh:
        log_fh.write("iteration,train_loss,valid_loss\n")
    try:
        for it in range(params.num_iterations):
            if params.bagging_fraction < 1.0 and it % params.bagging_freq == 0:
                bag_rows = np.sort(rng.choice(n, size=n_bag, replace=False)
                                   ).astype(np.int64)
            if multi:
                g, h = obj.softmax_grad_hess(targets, logits)
            else:
                g, h = obj.binary_grad_hess(targets, logits)
            for k in range(params.trees_per_iteration):
                allowed = None
                if params.feature_fraction < 1.0:
                    chosen = rng.choice(n_features, size=n_feat_sub, replace=False)
                    allowed = np.zeros(n_features, dtype=bool)
                    allowed[chosen] = True
                gk = np.ascontiguousarray(g[:, k]) if multi else g
                hk = np.ascontiguousarray(h[:, k]) if multi else h
                tree = grow_tree(codes, edges, gk, hk, bag_rows,
                                 num_leaves=params.num_leaves,
                                 min_samples_leaf=params.min_samples_leaf,
                                 lambda_l2=params.lambda_l2,
                                 learning_rate=params.learning_rate,
                                 allowed=allowed)
                trees.append(tree)
                step = tree.predict(x)
                vstep = tree.predict(valid_x) if has_valid else None
                if multi:
                    logits[:, k] += step
                    if has_valid:
                        vlogits[:, k] += vstep
                else:
                    logits += step
                    if has_valid:
                        vlogits += vstep
            if multi:
                train_loss = obj.multiclass_log_loss(targets, logits)
                valid_loss = (obj.multiclass_log_loss(valid_targets, vlogits)
                              if has_valid else math.nan)
            else:
                train_loss = obj.binary_log_loss(targets, logits)
                valid_loss = (obj.binary_log_loss(valid_targets, vlogits)
                              if has_valid else math.nan)
            history.append((it + 1, train_loss, valid_loss))
            if log_fh:
                log_fh.write(f"{it + 1},{train_loss!r},{valid_loss!r}\n")
            if has_valid and valid_loss < best_loss:
                best_loss = valid_loss
                best_iteration = it + 1
            if (has_valid and params.early_stopping_rounds > 0
                    and (it + 1) - best_iteration >= params.early_stopping_rounds):
                stopped = True
                break
    finally:
        if log_fh:
            log_fh.close()

    if not has_valid or params.early_stopping_rounds == 0:
        best_iteration = len(trees) // params.trees_per_iteration
    if stopped or len(trees) // params.trees_per_iteration > best_iteration:
        trees = trees[:best_iteration * params.trees_per_iteration]

    return BoostedModel(objective=params.objective,
                        num_class=params.num_class if multi else 1,
                        num_features=n_features,
                        base_score=base,
                        trees=trees,
                        best_iteration=best_iteration,
                        feature_names=tuple(feature_names) if feature_names else None,
                        history=history)


def train(params: GbdtParams, train_table: SampleTable,
          valid_table: SampleTable = None, soft_targets=None,
          log_path=None) -> BoostedModel:
    """Train on a sample table; labels come from the schema's label columns."""
    from ..tables import FEATURE_COLUMNS

    label_col = "label_bin" if params.objective == "binary" else "label_multi"
    x = train_table.features()
    if soft_targets is None:
        targets = _targets_from_labels(params, train_table.col(label_col))
    else:
        targets = np.asarray(soft_targets, dtype=np.float64)
    vx = vy = None
    if valid_table is not None:
        vx = valid_table.features()
        vy = valid_table.col(label_col)
    return train_arrays(params, x, targets, vx, vy,
                        feature_names=FEATURE_COLUMNS, log_path=log_path)


def feature_importance_gain(model: BoostedModel) -> np.ndarray:
    """Total split gain accumulated per feature across the ensemble."""
    imp = np.zeros(model.num_features)
    for t in model.trees:
        internal = t.feature >= 0
        np.add.at(imp, t.feature[internal], t.gain[internal])
    return imp


# ---------------------------------------------------------------- serialization

def _serialize_tree(tree: Tree, out: list):
    def rec(nid: int):
        if tree.feature[nid] < 0:
            out.append(f"L {float(tree.value[nid])!r}")
        else:
            out.append(f"N {int(tree.feature[nid])} "
                       f"{float(tree.threshold[nid])!r} "
                       f"{float(tree.gain[nid])!r}")
            rec(int(tree.left[nid]))
            rec(int(tree.right[nid]))
    rec(0)


def serialize_model(model: BoostedModel) -> str:
    lines = [f"{MODEL_MAGIC} v{MODEL_VERSION}",
             f"objective {model.objective}",
             f"num_class {model.num_class}",
             f"num_features {model.num_features}",
             f"best_iteration {model.best_iteration}",
             "base_score " + " ".join(repr(float(v)) for v in model.base_score),
             "feature_names " + (",".join(model.feature_names)
                                 if model.feature_names else "-"),
             f"num_trees {model.n_trees}"]
    for t, tree in enumerate(model.trees):
        lines.append(f"tree {t}")
        _serialize_tree(tree, lines)
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(model: BoostedModel, path):
    with open(path, "w") as fh:
        fh.write(serialize_model(model))


class _Cursor:
    def __init__(self, lines, origin):
        self.lines = lines
        self.pos = 0
        self.origin = origin

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise SchemaError(f"{self.origin}: truncated at line {self.pos + 1}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    @property
    def lineno(self) -> int:
        return self.pos


def _parse_tree(cur: _Cursor) -> Tree:
    feature, threshold, gain, left, right, value = [], [], [], [], [], []

    def rec() -> int:
        line = cur.next()
        parts = line.split()
        nid = len(feature)
        try:
            if parts and parts[0] == "L" and len(parts) == 2:
                feature.append(-1)
                threshold.append(0.0)
                gain.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(float(parts[1]))
                return nid
            if parts and parts[0] == "N" and len(parts) == 4:
                feature.append(int(parts[1]))
                threshold.append(float(parts[2]))
                gain.append(float(parts[3]))
                left.append(-1)
                right.append(-1)
                value.append(0.0)
                left[nid] = rec()
                right[nid] = rec()
                return nid
        except ValueError:
            pass
        raise SchemaError(f"{cur.origin}: bad node at line {cur.lineno}: {line!r}")

    rec()
    return Tree(feature=np.array(feature, dtype=np.int32),
                threshold=np.array(threshold, dtype=np.float64),
                gain=np.array(gain, dtype=np.float64),
                left=np.array(left, dtype=np.int32),
                right=np.array(right, dtype=np.int32),
                value=np.array(value, dtype=np.float64))


def deserialize_model(text: str, origin: str = "<string>") -> BoostedModel:
    cur = _Cursor(text.splitlines(), origin)

    def expect(key: str) -> str:
        line = cur.next()
        if not line.startswith(key + " "):
            raise SchemaError(f"{origin}: line {cur.lineno}: expected {key!r}, "
                              f"got {line!r}")
        return line[len(key) + 1:]

    magic = cur.next()
    if magic != f"{MODEL_MAGIC} v{MODEL_VERSION}":
        raise SchemaError(f"{origin}: unsupported model header {magic!r}")
    objective = expect("objective")
    if objective not in OBJECTIVES:
        raise SchemaError(f"{origin}: unknown objective {objective!r}")
    try:
        num_class = int(expect("num_class"))
        num_features = int(expect("num_features"))
        best_iteration = int(expect("best_iteration"))
        base = np.array([float(v) for v in expect("base_score").split()])
    except ValueError:
        raise SchemaError(f"{origin}: malformed header field near line "
                          f"{cur.lineno}") from None
    if base.shape != (num_class,):
        raise SchemaError(f"{origin}: base_score length != num_class")
    names_raw = expect("feature_names")
    names = None if names_raw == "-" else tuple(names_raw.split(","))
    if names is not None and len(names) != num_features:
        raise SchemaError(f"{origin}: feature_names length != num_features")
    try:
        num_trees = int(expect("num_trees"))
    except ValueError:
        raise SchemaError(f"{origin}: malformed num_trees near line "
                          f"{cur.lineno}") from None
    trees = []
    for t in range(num_trees):
        head = cur.next()
        if head != f"tree {t}":
            raise SchemaError(f"{origin}: line {cur.lineno}: expected 'tree {t}'")
        trees.append(_parse_tree(cur))
    tail = cur.next()
    if tail != "end":
        raise SchemaError(f"{origin}: line {cur.lineno}: expected 'end'")
    return BoostedModel(objective=objective, num_class=num_class,
                        num_features=num_features, base_score=base,
                        trees=trees, best_iteration=best_iteration,
                        feature_names=names)


def load_model(path) -> BoostedModel:
    with open(path) as fh:
        return deserialize_model(fh.read(), origin=str(path))
