"""Knowledge distillation from the multiclass ensemble into a smaller one.

The student trains on blended targets

    q = (alpha * onehot(y) + beta * softmax(teacher_logits / T)) / (alpha + beta)

so with beta = 0 the blend collapses to the hard labels exactly and the
student run is bit-identical to plain training under the same parameters
and seed.  Teacher logits over a table are cached on disk keyed by the
model and table contents, since they are the expensive part of repeated
distillation sweeps.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SchemaError
from .gbdt import (GbdtParams, predict_class, predict_raw, serialize_model,
                   softmax, train)
from .gbdt.model import BoostedModel, _targets_from_labels
from .tables import SampleTable


@dataclass
class KDConfig:
    # mimicry-heavy blend: the student should reproduce the teacher's
    # decisions, including its mistakes, not re-learn the labels
    alpha: float = 0.05       # weight of the hard labels
    beta: float = 0.95        # weight of the softened teacher
    temperature: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ConfigError("need alpha, beta >= 0 with alpha + beta > 0")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")


def soften(logits, temperature: float):
    """Temperature-scaled softmax of raw scores."""
    if temperature <= 0:
        raise ConfigError("temperature must be > 0")
    return softmax(np.asarray(logits, dtype=np.float64) / temperature)


def kd_targets(y_onehot, teacher_logits, cfg: KDConfig):
    """Row-stochastic blend of hard labels and softened teacher scores."""
    y_onehot = np.asarray(y_onehot, dtype=np.float64)
    if cfg.beta == 0.0:
        # exact passthrough keeps the no-teacher run bit-identical
        return (cfg.alpha * y_onehot) / cfg.alpha
    soft = soften(teacher_logits, cfg.temperature)
    if soft.shape != y_onehot.shape:
        raise SchemaError("teacher logits and labels disagree on shape")
    return (cfg.alpha * y_onehot + cfg.beta * soft) / (cfg.alpha + cfg.beta)


def _cache_key(teacher: BoostedModel, table: SampleTable) -> str:
    h = hashlib.sha256()
    h.update(serialize_model(teacher).encode())
    h.update(table.data.tobytes())
    return h.hexdigest()


def teacher_logits(teacher: BoostedModel, table: SampleTable,
                   cache_dir=None) -> np.ndarray:
    """Raw teacher scores for every row, optionally cached on disk."""
    if cache_dir is None:
        return predict_raw(teacher, table.features())
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, _cache_key(teacher, table) + ".npy")
    if os.path.exists(path):
        return np.load(path)
    logits = predict_raw(teacher, table.features())
    np.save(path, logits)
    return logits


def distill(teacher: BoostedModel, train_table: SampleTable,
            valid_table: SampleTable, student_params: GbdtParams,
            cfg: KDConfig, cache_dir=None, log_path=None):
    """Train the student and report the compression outcome.

    Returns (student, report): the report carries serialized sizes, the
    teacher-student argmax agreement, and both hard-label accuracies on
    the validation table.
    """
    if teacher.objective != "multiclass":
        raise ConfigError("distillation needs a multiclass teacher")
    if student_params.objective != "multiclass":
        raise ConfigError("student objective must be multiclass")
    if student_params.num_class != teacher.num_class:
        raise ConfigError("student num_class must match the teacher")

    y = train_table.col("label_multi")
    onehot = _targets_from_labels(student_params, y)
    logits = teacher_logits(teacher, train_table, cache_dir)
    q = kd_targets(onehot, logits, cfg)
    student = train(student_params, train_table, valid_table,
                    soft_targets=q, log_path=log_path)

    vx = valid_table.features()
    vy = valid_table.col("label_multi").astype(np.int64)
    pred_t = predict_class(teacher, vx)
    pred_s = predict_class(student, vx)
    teacher_bytes = len(serialize_model(teacher).encode())
    student_bytes = len(serialize_model(student).encode())
    report = {
        "teacher_size_bytes": teacher_bytes,
        "student_size_bytes": student_bytes,
        "size_reduction_pct": 100.0 * (1.0 - student_bytes / teacher_bytes),
        "argmax_agreement_pct": 100.0 * float(np.mean(pred_t == pred_s)),
        "accuracy_teacher": float(np.mean(pred_t == vy)),
        "accuracy_student": float(np.mean(pred_s == vy)),
    }
    return student, report


def format_report(report: dict) -> str:
    lines = ["distillation report"]
    for key in ("teacher_size_bytes", "student_size_bytes",
                "size_reduction_pct", "argmax_agreement_pct",
                "accuracy_teacher", "accuracy_student"):
        val = report[key]
        lines.append(f"{key} = {val:.4f}" if isinstance(val, float)
                     else f"{key} = {val}")
    return "\n".join(lines) + "\n"
