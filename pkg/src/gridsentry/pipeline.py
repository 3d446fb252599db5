"""From raw scenario tables to train / val / test splits.

Stages, in pipeline order: label each scenario, merge, thin the normal
class (every attack row survives, and so does a guard window around each
onset), split stratified on the multiclass label, then fit streaming
normalization statistics on the training partition and apply them to all
three.  Each stage is a pure function of its inputs and the seeds it is
handed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .attacks import AttackSpec
from .errors import SchemaError
from .tables import FEATURE_COLUMNS, LABEL_COLUMNS, SampleTable

ONSET_GUARD_S = 0.005  # keep all normal rows this close to an attack onset

SIGMA_FLOOR = 1e-12    # constant columns normalize to zero instead of blowing up


def label_scenario(table: SampleTable, attack: AttackSpec) -> SampleTable:
    """Attach label_bin / label_multi columns derived from the attack spec.

    Rows strictly before onset are normal; from the onset on they carry
    the attack's class.  A Normal spec labels everything (0, 0).
    """
    for c in LABEL_COLUMNS:
        if c in table.columns and table.col(c).any():
            raise SchemaError(f"table already carries labels in {c}")
    if all(c in table.columns for c in LABEL_COLUMNS):
        out = table.copy()
    else:
        cols = table.columns + LABEL_COLUMNS
        data = np.concatenate(
            [table.data, np.zeros((len(table), len(LABEL_COLUMNS)))], axis=1)
        out = SampleTable(cols, data)
    if attack.mode != "Normal":
        hit = out.col("time") >= attack.t_a
        out.data[hit, out.col_index("label_bin")] = 1.0
        out.data[hit, out.col_index("label_multi")] = float(attack.class_index)
    return out


def merge(tables) -> SampleTable:
    tables = list(tables)
    if not tables:
        raise SchemaError("nothing to merge")
    schema = tables[0].columns
    for k, t in enumerate(tables[1:], start=1):
        if t.columns != schema:
            raise SchemaError(f"table {k} schema differs from table 0")
    return SampleTable(schema, np.concatenate([t.data for t in tables], axis=0))


def downsample(table: SampleTable, normal_keep_fraction: float, seed: int,
               onset_guard: float = ONSET_GUARD_S) -> SampleTable:
    """Thin the normal class; attack rows and onset neighborhoods all stay.

    Scenario boundaries inside a merged table are recovered from the time
    column restarting, so each scenario's onset guard is local to it.
    """
    if not 0.0 < normal_keep_fraction <= 1.0:
        raise SchemaError("normal_keep_fraction must be in (0, 1]")
    t = table.col("time")
    y = table.col("label_bin")
    n = len(table)
    keep = y == 1.0

    # first row, plus any row whose time is not increasing, starts a scenario
    starts = np.flatnonzero(np.concatenate(([True], np.diff(t) <= 0)))
    bounds = np.concatenate((starts, [n]))
    rng = np.random.Generator(np.random.PCG64(seed))
    lottery = rng.random(n)
    for a, b in zip(bounds[:-1], bounds[1:]):
        seg_keep = keep[a:b]
        seg_t = t[a:b]
        onsets = np.flatnonzero(np.diff(np.concatenate(([0.0], y[a:b]))) > 0)
        for o in onsets:
            near = np.abs(seg_t - seg_t[o]) <= onset_guard
            seg_keep |= near
        normal = y[a:b] == 0.0
        seg_keep |= normal & (lottery[a:b] < normal_keep_fraction)
    return table.take(np.flatnonzero(keep))


def compact(table: SampleTable, to_float32: bool = False,
            rescale: float = 1.0) -> SampleTable:
    """Optional memory-style reductions; both are off by default.

    rescale divides the wide-range columns (P, Q, I) so their magnitudes
    stay float32-friendly; to_float32 rounds every feature through
    float32 precision.  Labels and time are never touched.
    """
    if rescale <= 0:
        raise SchemaError("rescale divisor must be positive")
    out = table.copy()
    if rescale != 1.0:
        wide = [c for c in FEATURE_COLUMNS
                if c.startswith(("P_DG", "Q_DG", "I"))]
        for name in wide:
            out.data[:, out.col_index(name)] /= rescale
    if to_float32:
        for name in FEATURE_COLUMNS:
            j = out.col_index(name)
            out.data[:, j] = out.data[:, j].astype(np.float32)
    return out


@dataclass
class NormStats:
    columns: tuple
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (len(self.columns),) or self.std.shape != self.mean.shape:
            raise SchemaError("stats shape does not match the column list")


def fit_norm_stats(table: SampleTable, chunk_rows: int = 65536) -> NormStats:
    """Mean and population standard deviation per feature column, streamed.

    Chunks are merged with the pairwise update so the result does not
    depend on chunk_rows beyond float round-off.  Columns with (near)
    zero spread get std 1 so normalization leaves them at zero.
    """
    if chunk_rows <= 0:
        raise SchemaError("chunk_rows must be positive")
    feats = table.features()
    n_total = feats.shape[0]
    if n_total == 0:
        raise SchemaError("cannot fit statistics on an empty table")
    count = 0
    mean = np.zeros(feats.shape[1])
    m2 = np.zeros(feats.shape[1])
    for lo in range(0, n_total, chunk_rows):
        chunk = feats[lo:lo + chunk_rows]
        c_n = chunk.shape[0]
        c_mean = chunk.mean(axis=0)
        c_m2 = ((chunk - c_mean) ** 2).sum(axis=0)
        if count == 0:
            count, mean, m2 = c_n, c_mean, c_m2
        else:
            delta = c_mean - mean
            tot = count + c_n
            mean = mean + delta * (c_n / tot)
            m2 = m2 + c_m2 + delta ** 2 * (count * c_n / tot)
            count = tot
    std = np.sqrt(m2 / count)
    std = np.where(std < SIGMA_FLOOR, 1.0, std)
    return NormStats(FEATURE_COLUMNS, mean, std)


def normalize(table: SampleTable, stats: NormStats) -> SampleTable:
    """Z-score the feature columns; time and labels pass through untouched."""
    if stats.columns != FEATURE_COLUMNS:
        raise SchemaError("stats were fit on a different column set")
    out = table.copy()
    for k, name in enumerate(stats.columns):
        j = out.col_index(name)
        out.data[:, j] = (out.data[:, j] - stats.mean[k]) / stats.std[k]
    return out


def denormalize(table: SampleTable, stats: NormStats) -> SampleTable:
    out = table.copy()
    for k, name in enumerate(stats.columns):
        j = out.col_index(name)
        out.data[:, j] = out.data[:, j] * stats.std[k] + stats.mean[k]
    return out


def write_norm_stats(stats: NormStats, path):
    with open(path, "w") as fh:
        fh.write(",".join(stats.columns) + "\n")
        fh.write(",".join("%.17g" % x for x in stats.mean) + "\n")
        fh.write(",".join("%.17g" % x for x in stats.std) + "\n")


def read_norm_stats(path) -> NormStats:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 3:
        raise SchemaError(f"{path}: expected header plus two stat rows")
    cols = tuple(lines[0].split(","))
    mean = np.array([float(x) for x in lines[1].split(",")])
    std = np.array([float(x) for x in lines[2].split(",")])
    return NormStats(cols, mean, std)


@dataclass
class SplitSpec:
    train: float = 0.70
    val: float = 0.15
    test: float = 0.15
    seed: int = 202

    def __post_init__(self):
        if min(self.train, self.val, self.test) <= 0:
            raise SchemaError("all split ratios must be positive")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise SchemaError("split ratios must sum to 1")


def stratified_split(table: SampleTable, spec: SplitSpec):
    """Per-class shuffled partition into train / val / test.

    Every multiclass label present must have at least 3 rows so each
    partition can receive one.  Row order inside each partition follows
    the source table, which keeps time ordering intact for the replay
    style evaluations.
    """
    y = table.col("label_multi").astype(np.int64)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    parts = ([], [], [])
    for cls in np.unique(y):
        rows = np.flatnonzero(y == cls)
        if rows.size < 3:
            raise SchemaError(f"class {cls} has only {rows.size} rows, need >= 3")
        rng.shuffle(rows)
        n_tr = int(round(spec.train * rows.size))
        n_va = int(round(spec.val * rows.size))
        n_tr = min(n_tr, rows.size - 2)
        n_va = max(1, min(n_va, rows.size - n_tr - 1))
        parts[0].append(rows[:n_tr])
        parts[1].append(rows[n_tr:n_tr + n_va])
        parts[2].append(rows[n_tr + n_va:])
    picks = [np.sort(np.concatenate(p)) for p in parts]
    return tuple(table.take(idx) for idx in picks)
