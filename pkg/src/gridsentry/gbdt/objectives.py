"""Second-order objective plumbing for the boosted trees.

Targets are distributions, not class indices: the binary target is a
probability in [0, 1] and the multiclass target a row-stochastic matrix.
Hard labels are the one-hot special case, which is what makes the
distillation path share every line of this code with plain training.
"""

from __future__ import annotations

import numpy as np


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def binary_grad_hess(target, logit):
    """g = p - q, h = p(1 - p) for p = sigmoid(logit)."""
    p = sigmoid(logit)
    return p - np.asarray(target, dtype=np.float64), p * (1.0 - p)


def softmax_grad_hess(targets, logits):
    """Per-class g = p_k - q_k, h = p_k (1 - p_k) under row-wise softmax."""
    p = softmax(logits)
    return p - np.asarray(targets, dtype=np.float64), p * (1.0 - p)


def binary_log_loss(target, logit):
    """Mean cross-entropy against a probability target, overflow-safe."""
    q = np.asarray(target, dtype=np.float64)
    z = np.asarray(logit, dtype=np.float64)
    # log(sigmoid(z)) = -softplus(-z), log(1 - sigmoid(z)) = -softplus(z)
    return float(np.mean(q * np.logaddexp(0.0, -z) + (1.0 - q) * np.logaddexp(0.0, z)))


def multiclass_log_loss(targets, logits):
    q = np.asarray(targets, dtype=np.float64)
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=1)
    lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
    return float(np.mean(lse - (q * z).sum(axis=1)))
