"""Mini-batch gradient descent for the teacher, student and baseline models.

Model kinds:

``cti-teacher``
    Trilinear model.  On multiple-choice data it scores each (V, Q, answer)
    triple with a binary head; on open-ended data it takes the right answer as
    its third input and classifies over the answer classes.
``bilinear-student``
    Bilinear (V, Q) classifier trained on hard labels (open-ended data).
``distilled-student``
    Same architecture and initialization as ``bilinear-student`` but trained
    with the distillation loss against a frozen teacher.
``pair-baseline``
    Concatenation of (V, Q) and (V, A) bilinear joints with a binary head
    (multiple-choice data).

The random stream for a run is ``default_rng(seed)``: initial parameters are
drawn first, then one permutation per epoch.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from ..distill import DistillConfig, kd_loss
from ..errors import ConfigError, DivergenceError
from ..grad import Tape, backward
from ..losses import bce_with_logits, cross_entropy
from .data import Dataset
from .metrics import EvalReport, evaluate_predictions
from .models import BilinearModel, CtiModel, PairConcatModel

__all__ = ["KINDS", "TrainConfig", "TrainResult", "init_model", "model_loss", "predict", "evaluate", "train"]

KINDS = ("cti-teacher", "bilinear-student", "distilled-student", "pair-baseline")
_TASKS = {"cti-teacher": ("mc", "ffoe"), "bilinear-student": ("ffoe",),
          "distilled-student": ("ffoe",), "pair-baseline": ("mc",)}


@dataclass(frozen=True)
class TrainConfig:
    step_size: float = 1e-3
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0
    clip_norm: float | None = 10.0
    d_z: int = 16
    R: int = 1
    normalize: str = "none"
    alpha: float = 0.5
    temperature: float = 3.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.d_z < 1 or self.R < 1:
            raise ConfigError("d_z and R must be >= 1")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError("clip_norm must be positive or None")
        DistillConfig(self.alpha, self.temperature)

    @property
    def distill(self) -> DistillConfig:
        return DistillConfig(self.alpha, self.temperature)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainResult:
    model: Any
    history: list[dict[str, float]] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.history[-1]["loss"]


def _dims(ds: Dataset):
    return (ds.v.shape[-1], ds.q.shape[-1], ds.answers.shape[-1])


def init_model(kind: str, ds: Dataset, cfg: TrainConfig, rng: np.random.Generator):
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {KINDS}")
    if ds.task not in _TASKS[kind]:
        raise ConfigError(f"{kind} does not train on {ds.task!r} data")
    d_v, d_q, d_a = _dims(ds)
    n_out = 1 if ds.task == "mc" else ds.n_classes
    if kind == "cti-teacher":
        return CtiModel.random((d_v, d_q, d_a), cfg.d_z, cfg.R, n_out, rng, cfg.normalize)
    if kind == "pair-baseline":
        return PairConcatModel.random((d_v, d_q, d_a), cfg.d_z, cfg.R, n_out, rng, cfg.normalize)
    return BilinearModel.random((d_v, d_q), cfg.d_z, cfg.R, n_out, rng, cfg.normalize)


def _mc_expand(ds: Dataset, idx):
    # One binary sample per (example, answer); positives carry the right answer.
    v, q, ans = ds.v[idx], ds.q[idx], ds.answers[idx]
    k = ans.shape[1]
    targets = (np.arange(k)[None, :] == ds.labels[idx][:, None]).astype(np.float64)
    return (np.repeat(v, k, axis=0), np.repeat(q, k, axis=0),
            ans.reshape(-1, *ans.shape[2:]), targets.reshape(-1))


def model_loss(model, ds: Dataset, idx, tape=None, teacher_logits=None, cfg: TrainConfig | None = None) -> float:
    """Training loss of ``model`` on examples ``idx`` (recording on ``tape`` if given)."""
    if ds.task == "mc":
        v, q, a, targets = _mc_expand(ds, idx)
        return bce_with_logits(model.logits(v, q, a, tape=tape), targets, tape=tape)
    y = ds.labels[idx]
    if isinstance(model, BilinearModel):
        logits = model.logits(ds.v[idx], ds.q[idx], tape=tape)
        if teacher_logits is not None:
            return kd_loss(logits, teacher_logits, y, cfg.distill, tape=tape)
        return cross_entropy(logits, y, tape=tape)
    return cross_entropy(model.logits(ds.v[idx], ds.q[idx], ds.true_answers[idx], tape=tape), y, tape=tape)


def predict(model, ds: Dataset, batch_size: int = 512) -> np.ndarray:
    """Predicted answer index (multiple choice) or class (open-ended) per example.

    A trilinear open-ended model needs an answer input, so it is scored on the
    right-answer triples.
    """
    out = []
    for start in range(0, len(ds), batch_size):
        idx = np.arange(start, min(start + batch_size, len(ds)))
        if ds.task == "mc":
            v, q, a, _ = _mc_expand(ds, idx)
            out.append(model.logits(v, q, a).reshape(len(idx), -1).argmax(axis=1))
        elif isinstance(model, BilinearModel):
            out.append(model.logits(ds.v[idx], ds.q[idx]).argmax(axis=1))
        else:
            out.append(model.logits(ds.v[idx], ds.q[idx], ds.true_answers[idx]).argmax(axis=1))
    return np.concatenate(out)


def evaluate(model, ds: Dataset) -> EvalReport:
    return evaluate_predictions(predict(model, ds), ds.labels, ds.qtypes, ds.type_names)


def teacher_logits_for(teacher, ds: Dataset, batch_size: int = 512) -> np.ndarray:
    chunks = []
    for start in range(0, len(ds), batch_size):
        idx = np.arange(start, min(start + batch_size, len(ds)))
        chunks.append(teacher.logits(ds.v[idx], ds.q[idx], ds.true_answers[idx]))
    return np.concatenate(chunks)


def _clip(grads, max_norm):
    if max_norm is None:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / norm
        return {k: g * scale for k, g in grads.items()}
    return grads


def train(kind: str, cfg: TrainConfig, train_set: Dataset, test_set: Dataset | None = None,
          teacher=None, on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Train a freshly initialized model of ``kind``; deterministic in ``cfg.seed``.

    History rows hold the epoch-mean training loss and, when ``test_set`` is
    given, its accuracy metrics.  Row 0 describes the initial parameters.
    """
    rng = np.random.default_rng(cfg.seed)
    model = init_model(kind, train_set, cfg, rng)
    t_logits = None
    if kind == "distilled-student":
        if teacher is None:
            raise ConfigError("distilled-student needs a trained teacher")
        t_logits = teacher_logits_for(teacher, train_set)
    n = len(train_set)

    def record(epoch, loss):
        row = {"epoch": epoch, "loss": loss}
        if test_set is not None:
            row.update(evaluate(model, test_set).as_row())
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)

    def batches(order):
        for start in range(0, n, cfg.batch_size):
            yield order[start:start + cfg.batch_size]

    history: list[dict[str, float]] = []
    init_losses = [model_loss(model, train_set, idx, teacher_logits=None if t_logits is None else t_logits[idx],
                              cfg=cfg) * len(idx) for idx in batches(np.arange(n))]
    record(0, float(sum(init_losses) / n))

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for idx in batches(order):
            tape = Tape()
            # Overflow shows up as a non-finite loss, reported just below.
            with np.errstate(over="ignore", invalid="ignore"):
                loss = model_loss(model, train_set, idx, tape=tape,
                                  teacher_logits=None if t_logits is None else t_logits[idx], cfg=cfg)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            grads = _clip(backward(tape), cfg.clip_norm)
            params = model.params()
            model = model.with_params({k: p - cfg.step_size * grads[k] for k, p in params.items()})
            total += loss * len(idx)
        record(epoch, total / n)
    return TrainResult(model, history)
