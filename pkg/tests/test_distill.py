"""Soft-target construction and the teacher-to-student training path."""

import numpy as np
import pytest

from gridsentry.distill import (KDConfig, distill, kd_targets, soften,
                                teacher_logits)
from gridsentry.errors import ConfigError, SchemaError
from gridsentry.gbdt import (GbdtParams, serialize_model, softmax, train,
                             train_arrays)
from gridsentry.gbdt.model import _targets_from_labels


def test_soften_hand_values():
    p = soften(np.array([2.0, 0.0]), temperature=2.0)
    assert p[0] == pytest.approx(0.7310585786300049, abs=1e-15)
    assert p[1] == pytest.approx(0.2689414213699951, abs=1e-15)


def test_soften_unit_temperature_is_softmax():
    logits = np.array([[3.0, 1.0, 0.2], [-1.0, 0.0, 1.0]])
    assert np.array_equal(soften(logits, 1.0), softmax(logits))


def test_soften_temperature_flattens():
    logits = np.array([3.0, 1.0, 0.0])

    def entropy(p):
        return float(-(p * np.log(p)).sum())

    hs = [entropy(soften(logits, t)) for t in (0.5, 1.0, 4.0)]
    assert hs[0] < hs[1] < hs[2]
    with pytest.raises(ConfigError):
        soften(logits, 0.0)


def test_kd_targets_blend():
    y = np.array([[1.0, 0.0]])
    logits = np.array([[0.0, 0.0]])  # teacher is uniform
    q = kd_targets(y, logits, KDConfig(alpha=0.9, beta=0.1, temperature=1.0))
    assert np.allclose(q, [[0.95, 0.05]], atol=1e-15)


def test_kd_targets_rows_are_stochastic():
    rng = np.random.Generator(np.random.PCG64(2))
    y = np.zeros((40, 7))
    y[np.arange(40), rng.integers(0, 7, 40)] = 1.0
    logits = rng.normal(size=(40, 7))
    q = kd_targets(y, logits, KDConfig(alpha=0.3, beta=0.7, temperature=2.0))
    assert np.allclose(q.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(q >= 0.0)


def test_kd_targets_beta_zero_is_exact_passthrough():
    y = np.zeros((10, 7))
    y[:, 3] = 1.0
    q = kd_targets(y, np.full((10, 7), np.nan),
                   KDConfig(alpha=0.3, beta=0.0, temperature=2.0))
    assert np.array_equal(q, y)


def test_kd_targets_shape_mismatch():
    y = np.zeros((4, 7))
    with pytest.raises(SchemaError):
        kd_targets(y, np.zeros((4, 3)), KDConfig(alpha=0.5, beta=0.5))


def test_kd_config_validation():
    with pytest.raises(ConfigError):
        KDConfig(alpha=-0.1, beta=0.5)
    with pytest.raises(ConfigError):
        KDConfig(alpha=0.0, beta=0.0)
    with pytest.raises(ConfigError):
        KDConfig(temperature=0.0)


def _teacher_and_tables(table_factory):
    train_table = table_factory(700, seed=21, separation=3.0)
    valid_table = table_factory(210, seed=22, separation=3.0)
    params = GbdtParams(num_class=7, num_iterations=15, learning_rate=0.2,
                        num_leaves=15, min_samples_leaf=10,
                        feature_fraction=1.0, bagging_fraction=1.0,
                        early_stopping_rounds=0, seed=31)
    teacher = train(params, train_table, valid_table)
    return teacher, train_table, valid_table


def _student_params(**overrides):
    base = dict(objective="multiclass", num_class=7, num_iterations=8,
                learning_rate=0.3, num_leaves=7, min_samples_leaf=10,
                feature_fraction=1.0, bagging_fraction=1.0,
                early_stopping_rounds=0, seed=55)
    base.update(overrides)
    return GbdtParams(**base)


def test_distill_beta_zero_matches_plain_training(table_factory):
    teacher, tr, va = _teacher_and_tables(table_factory)
    params = _student_params()
    student, _ = distill(teacher, tr, va, params,
                         KDConfig(alpha=1.0, beta=0.0, temperature=2.0))
    plain = train(params, tr, va)
    assert serialize_model(student) == serialize_model(plain)


def test_distill_report_fields(table_factory):
    teacher, tr, va = _teacher_and_tables(table_factory)
    student, report = distill(teacher, tr, va, _student_params(),
                              KDConfig(alpha=0.05, beta=0.95, temperature=1.0))
    assert set(report) == {"teacher_size_bytes", "student_size_bytes",
                           "size_reduction_pct", "argmax_agreement_pct",
                           "accuracy_teacher", "accuracy_student"}
    assert 0.0 <= report["argmax_agreement_pct"] <= 100.0
    assert report["student_size_bytes"] < report["teacher_size_bytes"]
    assert student.num_class == teacher.num_class


def test_distill_rejects_binary_teacher(table_factory):
    tr = table_factory(200, seed=1, separation=3.0)
    params = GbdtParams(objective="binary", num_class=2, num_iterations=3,
                        min_samples_leaf=10, early_stopping_rounds=0)
    binary = train(params, tr)
    with pytest.raises(ConfigError):
        distill(binary, tr, tr, _student_params(), KDConfig())


def test_teacher_logits_cache_round_trip(tmp_path, table_factory):
    teacher, tr, _ = _teacher_and_tables(table_factory)
    first = teacher_logits(teacher, tr, cache_dir=tmp_path)
    files = list(tmp_path.glob("*.npy"))
    assert len(files) == 1
    second = teacher_logits(teacher, tr, cache_dir=tmp_path)
    assert np.array_equal(first, second)
    direct = teacher_logits(teacher, tr, cache_dir=None)
    assert np.array_equal(first, direct)
