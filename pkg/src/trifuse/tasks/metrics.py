"""Overall accuracy and per-question-type means (arithmetic and harmonic)."""
from __future__ import annotations

import logging
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["EvalReport", "evaluate_predictions", "type_means"]

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    acc: float
    ari: float
    har: float
    per_type: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    excluded: list[str] = field(default_factory=list)

    def as_row(self) -> dict[str, float]:
        return {"acc": self.acc, "ari": self.ari, "har": self.har}


def type_means(per_type_acc: Sequence[float]) -> tuple[float, float]:
    """Arithmetic and harmonic mean of per-type accuracies.

    Both means are computed exactly in rationals and rounded once, so
    ``har <= ari`` holds in floating point too.  The harmonic mean is 0 as
    soon as one type has accuracy 0.

    >>> type_means([1.0, 0.5])
    (0.75, 0.6666666666666666)
    """
    vals = [Fraction(float(a)) for a in per_type_acc]
    if not vals:
        raise ValueError("no question types to average")
    ari = float(sum(vals) / len(vals))
    har = 0.0 if min(vals) == 0 else float(len(vals) / sum(1 / a for a in vals))
    return ari, har


def evaluate_predictions(pred, labels, qtypes, type_names: Sequence[str] | None = None) -> EvalReport:
    """Accuracy report; declared types with no examples are excluded and listed."""
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    qtypes = np.asarray(qtypes, dtype=object)
    if pred.shape != labels.shape or qtypes.shape != labels.shape:
        raise ValueError("predictions, labels and question types must have equal length")
    if labels.size == 0:
        raise ValueError("cannot evaluate an empty dataset")
    correct = pred == labels
    names = list(type_names) if type_names is not None else sorted(set(qtypes.tolist()))
    per_type, counts, excluded = {}, {}, []
    for name in names:
        mask = qtypes == name
        if not mask.any():
            excluded.append(name)
            log.warning("question type %r has no examples; excluded from type means", name)
            continue
        per_type[name] = float(correct[mask].mean())
        counts[name] = int(mask.sum())
    ari, har = type_means(per_type.values())
    return EvalReport(float(correct.mean()), ari, har, per_type, counts, excluded)
