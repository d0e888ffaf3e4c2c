"""Reverse-mode gradients over a short sequential tape, and a central-difference checker.

A forward pass that is given a :class:`Tape` pushes one closure per stage
(layer, head, loss).  Each closure maps the gradient of its stage output to
``(param_grads, grad_of_stage_input)``; :func:`backward` walks them in reverse.
The adjoints themselves live next to the forward code they differentiate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DivergenceError, TapeError

__all__ = [
    "Tape",
    "backward",
    "GradCheckReport",
    "finite_difference_check",
    "relative_error",
    "add_bundles",
]

GradientBundle = dict  # parameter name -> ndarray shaped like the parameter

StageBackward = Callable[[object], "tuple[Mapping[str, np.ndarray], object]"]


class Tape:
    """Single-use record of differentiable stages, in forward order."""

    def __init__(self):
        self._stages: list[StageBackward] = []
        self._consumed = False

    def push(self, fn: StageBackward) -> None:
        if self._consumed:
            raise TapeError("tape already consumed by backward; record a new forward pass")
        self._stages.append(fn)

    def __len__(self):
        return len(self._stages)


def backward(tape: Tape, upstream=1.0, *, inputs: bool = False) -> GradientBundle:
    """Gradients of the last recorded output for every parameter on ``tape``.

    ``upstream`` is the gradient of the final stage output (1.0 for a scalar
    loss).  Input gradients appear under ``input.*`` keys when ``inputs`` is set.
    """
    if tape is None or not isinstance(tape, Tape):
        raise TapeError("backward needs the Tape passed to the forward call")
    if tape._consumed:
        raise TapeError("tape already consumed by backward")
    if not tape._stages:
        raise TapeError("tape is empty: run a forward pass with tape=... first")
    tape._consumed = True
    grads: GradientBundle = {}
    g = upstream
    for fn in reversed(tape._stages):
        stage_grads, g = fn(g)
        for name, value in stage_grads.items():
            if name.startswith("input.") and not inputs:
                continue
            grads[name] = grads[name] + value if name in grads else value
    return grads


def add_bundles(a: Mapping[str, np.ndarray], b: Mapping[str, np.ndarray]) -> GradientBundle:
    out = dict(a)
    for k, v in b.items():
        out[k] = out[k] + v if k in out else v
    return out


def relative_error(analytic, numeric, floor: float = 1e-8) -> np.ndarray:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float] = field(default_factory=dict)
    n_checked: dict[str, int] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.worst <= tol

    def format(self, tol: float = 1e-4) -> str:
        lines = []
        for name, err in self.max_rel_error.items():
            status = "ok" if err <= tol else "FAIL"
            lines.append(f"  {name:<28s} {err:10.3e}  ({self.n_checked[name]} entries) {status}")
        return "\n".join(lines)


def finite_difference_check(
    loss_fn: Callable[[Mapping[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare ``grads`` against central differences of ``loss_fn`` around ``params``.

    Every entry is perturbed unless ``max_entries`` caps the count per
    parameter, in which case entries are sampled with ``rng``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = float(loss_fn(params))
    if not math.isfinite(base):
        raise DivergenceError(f"loss is not finite at the check point: {base}")
    report = GradCheckReport()
    rng = rng if rng is not None else np.random.default_rng(0)
    for name, value in params.items():
        value = np.asarray(value, dtype=np.float64)
        if name not in grads:
            raise KeyError(f"no analytic gradient for parameter {name!r}")
        analytic = np.asarray(grads[name], dtype=np.float64)
        if analytic.shape != value.shape:
            raise ValueError(f"gradient for {name!r} has shape {analytic.shape}, parameter {value.shape}")
        flat_idx = np.arange(value.size)
        if max_entries is not None and value.size > max_entries:
            flat_idx = np.sort(rng.choice(value.size, size=max_entries, replace=False))
        worst = 0.0
        for fi in flat_idx:
            idx = np.unravel_index(fi, value.shape)
            losses = []
            for step in (eps, -eps):
                bumped = value.copy()
                bumped[idx] += step
                trial = dict(params)
                trial[name] = bumped
                loss = float(loss_fn(trial))
                if not math.isfinite(loss):
                    raise DivergenceError(f"non-finite loss while perturbing {name}{idx}")
                losses.append(loss)
            numeric = (losses[0] - losses[1]) / (2 * eps)
            worst = max(worst, float(relative_error(analytic[idx], numeric)))
        report.max_rel_error[name] = worst
        report.n_checked[name] = len(flat_idx)
    return report
