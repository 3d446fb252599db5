"""Metrics, ablation, latency, and replay-style checks for trained models.

Everything here consumes the normalized split tables and trained
ensembles; nothing retrains except the ablation sweep, which refits the
same parameters on reduced feature sets so the comparison is seed-for-
seed fair.
"""

from __future__ import annotations

import os
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .gbdt import GbdtParams, predict_class, predict_proba, train_arrays
from .tables import FEATURE_COLUMNS, SampleTable

# feature groups for the leave-one-group-out sweep
ABLATION_GROUPS = (
    ("P", tuple(c for c in FEATURE_COLUMNS if c.startswith("P_DG"))),
    ("Q", tuple(c for c in FEATURE_COLUMNS if c.startswith("Q_DG"))),
    ("f", tuple(c for c in FEATURE_COLUMNS if c.startswith("f_DG"))),
    ("V", ("V1", "V2", "V3")),
    ("I", ("I1", "I2", "I3")),
)


@dataclass
class MetricsReport:
    accuracy: float
    precision: np.ndarray   # (k,)
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray     # (k,) true-class counts
    macro_f1: float         # over classes with support
    weighted_f1: float
    confusion: np.ndarray   # (k, k), rows true, cols predicted
    n_samples: int

    def lines(self, class_names=None):
        k = self.confusion.shape[0]
        names = class_names or [str(c) for c in range(k)]
        out = [f"n_samples {self.n_samples}",
               f"accuracy {self.accuracy:.6f}",
               f"macro_f1 {self.macro_f1:.6f}",
               f"weighted_f1 {self.weighted_f1:.6f}"]
        for c in range(k):
            out.append(f"class {names[c]}: precision {self.precision[c]:.6f} "
                       f"recall {self.recall[c]:.6f} f1 {self.f1[c]:.6f} "
                       f"support {int(self.support[c])}")
        return out


def compute_metrics(y_true, y_pred, n_class: int) -> MetricsReport:
    """Accuracy, per-class precision / recall / F1, macro and weighted F1.

    Undefined ratios (an unpredicted or unsupported class) are reported
    as 0; classes with no true rows are left out of the macro average
    with a warning.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise SchemaError("labels and predictions must be equal-length vectors")
    if y_true.size == 0:
        raise SchemaError("cannot score an empty prediction set")
    if ((y_true < 0) | (y_true >= n_class) | (y_pred < 0)
            | (y_pred >= n_class)).any():
        raise SchemaError(f"labels outside [0, {n_class})")

    confusion = np.bincount(y_true * n_class + y_pred,
                            minlength=n_class * n_class)
    confusion = confusion.reshape(n_class, n_class)
    tp = np.diagonal(confusion).astype(np.float64)
    support = confusion.sum(axis=1).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)

    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / pr, 0.0)

    present = support > 0
    if not present.all():
        missing = np.flatnonzero(~present).tolist()
        warnings.warn(f"classes {missing} have no true rows; "
                      "macro F1 averages the remaining classes")
    macro_f1 = float(f1[present].mean())
    weighted_f1 = float((f1 * support).sum() / support.sum())
    accuracy = float(tp.sum() / support.sum())
    return MetricsReport(accuracy=accuracy, precision=precision, recall=recall,
                         f1=f1, support=support, macro_f1=macro_f1,
                         weighted_f1=weighted_f1, confusion=confusion,
                         n_samples=int(y_true.size))


def evaluate_model(model, table: SampleTable) -> MetricsReport:
    label = "label_bin" if model.objective == "binary" else "label_multi"
    y = table.col(label).astype(np.int64)
    pred = predict_class(model, table.features())
    n_class = 2 if model.objective == "binary" else model.num_class
    return compute_metrics(y, pred, n_class)


@dataclass
class AblationRow:
    group: str             # "none" for the baseline
    removed_columns: tuple
    macro_f1: float
    drop_pct: float        # baseline minus this, in percentage points


def run_ablation(params: GbdtParams, train_table: SampleTable,
                 valid_table: SampleTable, test_table: SampleTable,
                 groups=ABLATION_GROUPS):
    """Retrain per feature group left out; returns baseline-first rows."""
    if params.objective != "multiclass":
        raise SchemaError("the ablation sweep is defined on the multiclass task")
    for name, cols in groups:
        unknown = [c for c in cols if c not in FEATURE_COLUMNS]
        if unknown:
            raise SchemaError(f"ablation group {name} references unknown "
                              f"columns {unknown}")
    y_tr = train_table.col("label_multi").astype(np.int64)
    y_va = valid_table.col("label_multi").astype(np.int64)
    y_te = test_table.col("label_multi").astype(np.int64)
    x_tr = train_table.features()
    x_va = valid_table.features()
    x_te = test_table.features()

    def fit_score(keep_idx):
        from .gbdt.model import _targets_from_labels
        targets = _targets_from_labels(params, y_tr)
        model = train_arrays(params, x_tr[:, keep_idx], targets,
                             x_va[:, keep_idx], y_va)
        pred = predict_class(model, x_te[:, keep_idx])
        return compute_metrics(y_te, pred, params.num_class).macro_f1

    all_idx = np.arange(len(FEATURE_COLUMNS))
    baseline = fit_score(all_idx)
    rows = [AblationRow("none", (), baseline, 0.0)]
    for name, cols in groups:
        drop = {FEATURE_COLUMNS.index(c) for c in cols}
        keep = np.array([i for i in all_idx if i not in drop])
        score = fit_score(keep)
        rows.append(AblationRow(name, cols, score,
                                100.0 * (baseline - score)))
    return rows


def ablation_csv(rows) -> str:
    out = ["group,removed,macro_f1,drop_pct"]
    for r in rows:
        removed = ";".join(r.removed_columns) if r.removed_columns else "-"
        out.append(f"{r.group},{removed},{r.macro_f1:.6f},{r.drop_pct:.4f}")
    return "\n".join(out) + "\n"


@dataclass
class LatencyReport:
    batch_rows: int
    repetitions: int       # counted repetitions, after warm-up
    warmup: int
    ms_per_batch: list     # per counted repetition
    median_ms_per_1000: float
    us_per_sample: float
    threads: int = 1


def bench_latency(model, table: SampleTable, batch_rows: int = 1000,
                  repetitions: int = 12, warmup: int = 2) -> LatencyReport:
    """Median single-threaded wall time to classify batch_rows consecutive rows.

    The batch goes through predict_proba in one call, so the number is
    dominated by tree traversal rather than per-row dispatch overhead.
    """
    if repetitions - warmup < 10:
        raise SchemaError("need at least 10 counted repetitions")
    feats = table.features()
    if feats.shape[0] < batch_rows:
        raise SchemaError(f"latency bench needs {batch_rows} rows, table has "
                          f"{feats.shape[0]}")
    batch = np.ascontiguousarray(feats[:batch_rows])
    times_ms = []
    for rep in range(repetitions):
        t0 = time.perf_counter()
        predict_proba(model, batch)
        times_ms.append((time.perf_counter() - t0) * 1e3)
    counted = times_ms[warmup:]
    scale = 1000.0 / batch_rows
    median = float(np.median(counted)) * scale
    return LatencyReport(batch_rows=batch_rows,
                         repetitions=len(counted), warmup=warmup,
                         ms_per_batch=counted,
                         median_ms_per_1000=median,
                         us_per_sample=median)


def model_size_bytes(path) -> int:
    return os.path.getsize(path)


@dataclass
class DemoRow:
    time_s: float
    truth: int
    predicted: int
    confidence: float


def realtime_demo(model, table: SampleTable, n_rows: int = 10,
                  seed: int = 404):
    """Classify n random rows one at a time, as an online detector would."""
    if len(table) < n_rows:
        raise SchemaError(f"table has fewer than {n_rows} rows")
    label = "label_bin" if model.objective == "binary" else "label_multi"
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = np.sort(rng.choice(len(table), size=n_rows, replace=False))
    feats = table.features()
    y = table.col(label).astype(np.int64)
    t = table.col("time")
    rows = []
    for i in picks:
        proba = predict_proba(model, feats[i])
        if model.objective == "binary":
            pred, conf = int(proba >= 0.5), float(proba if proba >= 0.5 else 1 - proba)
        else:
            pred, conf = int(np.argmax(proba)), float(np.max(proba))
        rows.append(DemoRow(float(t[i]), int(y[i]), pred, conf))
    matches = sum(r.truth == r.predicted for r in rows)
    return rows, matches


def kd_trajectory(teacher, student, table: SampleTable, window_rows: int = 400):
    """True/teacher/student class trajectories over the table's head.

    Returns (rows, agreement_pct) where each row is (time, truth,
    teacher_class, student_class).  The table must keep its original time
    order for the trajectory to mean anything.
    """
    if len(table) == 0 or window_rows < 1:
        raise SchemaError("trajectory window is empty")
    take = min(window_rows, len(table))
    feats = table.features()[:take]
    y = table.col("label_multi").astype(np.int64)[:take]
    t = table.col("time")[:take]
    pred_t = predict_class(teacher, feats)
    pred_s = predict_class(student, feats)
    agreement = 100.0 * float(np.mean(pred_t == pred_s))
    rows = list(zip(t.tolist(), y.tolist(), pred_t.tolist(), pred_s.tolist()))
    return rows, agreement


def kd_trajectory_csv(rows) -> str:
    out = ["time,truth,teacher,student"]
    for t, y, pt, ps in rows:
        out.append(f"{t:.9g},{y},{pt},{ps}")
    return "\n".join(out) + "\n"
