"""Finite-difference checks of every learnable parameter of the shipped models.

Each check builds a tiny model (all dims <= 4), records one forward pass on a
tape, and compares the backward gradients with central differences.
"""
from __future__ import annotations

import numpy as np

from .distill import DistillConfig, kd_loss
from .grad import GradCheckReport, Tape, backward, finite_difference_check
from .losses import bce_with_logits, cross_entropy
from .tasks.models import BilinearModel, CtiModel, PairConcatModel

__all__ = ["GRADCHECK_TOL", "gradcheck_cases", "run_gradchecks", "format_gradchecks"]

GRADCHECK_TOL = 1e-4


def _inputs(rng, B, n, d):
    return [rng.normal(size=(B, nn, dd)) for nn, dd in zip(n, d)]


def _model_case(model, loss_of, eps):
    def loss_fn(flat, tape=None):
        return loss_of(model.with_params(flat), tape)

    tape = Tape()
    loss_fn(model.params(), tape)
    return lambda: finite_difference_check(loss_fn, model.params(), backward(tape), eps=eps)


def gradcheck_cases(seed: int = 0, eps: float = 1e-5) -> dict:
    """Name -> zero-argument callable returning a :class:`GradCheckReport`."""
    rng = np.random.default_rng(seed)
    B, n, d = 3, (2, 3, 2), (4, 2, 4)
    v, q, a = _inputs(rng, B, n, d)
    y = rng.integers(0, 3, size=B)
    cases = {}
    for normalize in ("none", "softmax"):
        cti = CtiModel.random(d, 3, 2, 3, rng, normalize)
        cases[f"cti+head ce ({normalize})"] = _model_case(
            cti, lambda m, tape: cross_entropy(m.logits(v, q, a, tape=tape), y, tape=tape), eps)
    cti_bin = CtiModel.random(d, 4, 1, 1, rng, "softmax")
    targets = rng.integers(0, 2, size=B).astype(float)
    cases["cti+head bce"] = _model_case(
        cti_bin, lambda m, tape: bce_with_logits(m.logits(v, q, a, tape=tape), targets, tape=tape), eps)
    for normalize in ("none", "softmax"):
        bil = BilinearModel.random(d[:2], 3, 2, 3, rng, normalize)
        cases[f"bilinear+head ce ({normalize})"] = _model_case(
            bil, lambda m, tape: cross_entropy(m.logits(v, q, tape=tape), y, tape=tape), eps)
    pair = PairConcatModel.random(d, 2, 1, 1, rng, "softmax")
    cases["pair-concat bce"] = _model_case(
        pair, lambda m, tape: bce_with_logits(m.logits(v, q, a, tape=tape), targets, tape=tape), eps)

    student = BilinearModel.random(d[:2], 3, 1, 3, rng, "softmax")
    teacher_logits = 2.0 * rng.normal(size=(B, 3))
    for alpha in (0.0, 0.5, 1.0):
        for T in (1.0, 3.0):
            cfg = DistillConfig(alpha, T)
            cases[f"kd loss a={alpha:g} T={T:g}"] = _model_case(
                student, lambda m, tape, cfg=cfg: kd_loss(m.logits(v, q, tape=tape), teacher_logits, y, cfg,
                                                          tape=tape), eps)
    return cases


def run_gradchecks(seed: int = 0, eps: float = 1e-5) -> dict[str, GradCheckReport]:
    return {name: case() for name, case in gradcheck_cases(seed, eps).items()}


def format_gradchecks(reports: dict[str, GradCheckReport], tol: float = GRADCHECK_TOL) -> str:
    lines = []
    for name, rep in reports.items():
        lines.append(f"{name:<28s} max rel err {rep.worst:.3e}  {'pass' if rep.passed(tol) else 'FAIL'}")
        lines.append(rep.format(tol))
    ok = all(r.passed(tol) for r in reports.values())
    lines.append(f"gradient check {'passed' if ok else 'FAILED'} at tolerance {tol:g}")
    return "\n".join(lines) + "\n"
