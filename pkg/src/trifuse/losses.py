"""Softmax and the two classification losses, with tape-recorded adjoints.

Losses average over the batch; a single example is a batch of one.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError

__all__ = ["softmax", "log_softmax", "sigmoid", "cross_entropy", "bce_with_logits"]


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64) / temperature
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits, temperature: float = 1.0) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64) / temperature
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def _as_batch_logits(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    single = logits.ndim == 1
    if single:
        logits, labels = logits[None], labels.reshape(1)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"logits {logits.shape} and labels {labels.shape} do not pair up")
    return logits, labels, single


def cross_entropy(logits, labels, tape=None) -> float:
    """Mean of ``-log softmax(logits)[label]``."""
    logits, labels, single = _as_batch_logits(logits, labels)
    n_classes = logits.shape[1]
    labels = labels.astype(np.int64)
    if labels.min() < 0 or labels.max() >= n_classes:
        raise IndexError(f"class index out of range for {n_classes} classes")
    logp = log_softmax(logits)
    rows = np.arange(len(labels))
    loss = float(-logp[rows, labels].mean())
    if tape is not None:
        def _back(g):
            d = np.exp(logp)
            d[rows, labels] -= 1.0
            d *= g / len(labels)
            return {}, d[0] if single else d
        tape.push(_back)
    return loss


def bce_with_logits(logits, targets, tape=None) -> float:
    """Mean binary cross entropy of sigmoid(logits) against 0/1 targets."""
    x = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"logits {x.shape} and targets {y.shape} differ")
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    loss = float(per.mean())
    if tape is not None:
        def _back(g):
            return {}, (sigmoid(x) - y) * (g / x.size)
        tape.push(_back)
    return loss
