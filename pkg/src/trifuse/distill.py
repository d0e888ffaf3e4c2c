"""Temperature-softened softmax and the teacher/student distillation loss.

The soft term is a cross entropy with the teacher distribution as the fixed
target and the student distribution as the prediction; it is scaled by
``T**2`` so its gradient magnitude does not shrink as the temperature grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .grad import Tape, backward
from .losses import log_softmax, softmax

__all__ = ["DistillConfig", "softened_softmax", "kd_terms", "kd_loss", "teacher_student_step"]


@dataclass(frozen=True)
class DistillConfig:
    alpha: float = 0.5
    temperature: float = 3.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ConfigError(f"temperature must be positive and finite, got {self.temperature}")


def softened_softmax(logits, temperature: float) -> np.ndarray:
    """``exp(l_i / T) / sum_j exp(l_j / T)`` along the last axis.

    >>> softened_softmax([0.0, np.log(3.0)], 1.0)
    array([0.25, 0.75])
    """
    if not temperature > 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return softmax(logits, temperature)


def _batch(student_logits, teacher_logits, y_true):
    s = np.asarray(student_logits, dtype=np.float64)
    t = np.asarray(teacher_logits, dtype=np.float64)
    y = np.asarray(y_true)
    single = s.ndim == 1
    if single:
        s, t, y = s[None], t[None], y.reshape(1)
    if s.shape != t.shape or s.ndim != 2 or y.shape != (s.shape[0],):
        raise DimensionError(
            f"student logits {s.shape}, teacher logits {t.shape} and labels {y.shape} do not pair up")
    y = y.astype(np.int64)
    if y.min() < 0 or y.max() >= s.shape[1]:
        raise IndexError(f"class index out of range for {s.shape[1]} classes")
    return s, t, y, single


def kd_terms(student_logits, teacher_logits, y_true, temperature: float):
    """``(soft, hard)`` with ``soft = T**2 * CE(teacher_T -> student_T)`` and ``hard = CE(student, y)``."""
    s, t, y, _ = _batch(student_logits, teacher_logits, y_true)
    T = float(temperature)
    target = softened_softmax(t, T)
    soft = T * T * float(-(target * log_softmax(s, T)).sum(axis=1).mean())
    hard = float(-log_softmax(s)[np.arange(len(y)), y].mean())
    return soft, hard


def kd_loss(student_logits, teacher_logits, y_true, cfg: DistillConfig = DistillConfig(), tape=None) -> float:
    """Mixed distillation loss ``alpha * soft + (1 - alpha) * hard``, averaged over the batch.

    Only the student logits receive a gradient.
    """
    s, t, y, single = _batch(student_logits, teacher_logits, y_true)
    soft, hard = kd_terms(s, t, y, cfg.temperature)
    loss = cfg.alpha * soft + (1.0 - cfg.alpha) * hard
    if tape is not None:
        T = cfg.temperature
        q_t = softened_softmax(t, T)

        def _back(g):
            onehot = np.zeros_like(s)
            onehot[np.arange(len(y)), y] = 1.0
            d_soft = T * (softened_softmax(s, T) - q_t)
            d_hard = softmax(s) - onehot
            d = (cfg.alpha * d_soft + (1.0 - cfg.alpha) * d_hard) * (g / len(y))
            return {}, d[0] if single else d
        tape.push(_back)
    return loss


def teacher_student_step(teacher, student, batch, cfg: DistillConfig, teacher_logits=None):
    """Distillation loss and student gradients for one batch.

    ``batch`` maps ``v``, ``q``, ``a`` (the right answer, used by the teacher
    only) and ``y``.  The teacher is evaluated without a tape, so nothing in it
    can receive a gradient.
    """
    if teacher_logits is None:
        teacher_logits = teacher.logits(batch["v"], batch["q"], batch["a"])
    tape = Tape()
    student_logits = student.logits(batch["v"], batch["q"], tape=tape)
    loss = kd_loss(student_logits, teacher_logits, batch["y"], cfg, tape=tape)
    return loss, backward(tape)
