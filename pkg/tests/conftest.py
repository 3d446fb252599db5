"""Shared fixtures: synthetic sample tables and small learnable datasets."""

import numpy as np
import pytest

from gridsentry.tables import SCHEMA, SampleTable

N_FEATURES = 36


def _make_table(n_rows, seed=0, n_class=7, labeled=True, separation=0.0,
                dt=1e-3, time_start=0.0):
    """Schema-complete table with round-robin classes.

    separation > 0 shifts feature column c by that amount for class c,
    which makes the classes learnable by a small tree ensemble.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    data = np.zeros((n_rows, len(SCHEMA)))
    data[:, 0] = time_start + np.arange(n_rows) * dt
    data[:, 1:1 + N_FEATURES] = rng.normal(size=(n_rows, N_FEATURES))
    if labeled:
        y = np.arange(n_rows) % n_class
        data[:, -2] = (y > 0).astype(np.float64)
        data[:, -1] = y.astype(np.float64)
        if separation > 0:
            for c in range(n_class):
                data[y == c, 1 + c] += separation
    return SampleTable(SCHEMA, data)


@pytest.fixture
def table_factory():
    return _make_table


@pytest.fixture
def toy_xy():
    """Separable 3-class blobs as plain arrays: (x, y)."""
    def build(n_per_class=100, n_features=4, seed=11, spread=0.4):
        rng = np.random.Generator(np.random.PCG64(seed))
        xs, ys = [], []
        for c in range(3):
            center = np.zeros(n_features)
            center[c % n_features] = 3.0
            xs.append(center + spread * rng.normal(size=(n_per_class, n_features)))
            ys.append(np.full(n_per_class, c))
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        order = rng.permutation(x.shape[0])
        return x[order], y[order]
    return build
