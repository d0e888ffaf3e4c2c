"""Identity suites comparing the factorized layers against brute-force oracles.

Each suite draws random tiny configurations and records the worst relative
error between two independent routes to the same quantity:

``attention-map``
    Factorized attention vs. mode products of the reconstructed attention tensor.
``joint-representation``
    Hadamard joint vector vs. per-triplet interactions with the reconstructed
    superdiagonal joint tensor.
``unitary-attention``
    Per-triplet weighted sum vs. the fully parameterized interaction on the
    vectorized inputs.
``ban-form``
    Hadamard bilinear joint vs. the rank-one ``V W Q^T`` form.
``bilinear-degenerate``
    Bilinear layer vs. the trilinear layer with a constant one-channel,
    one-dimensional third input.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bilinear import BilinearParams, bilinear_attention, bilinear_forward, bilinear_joint, bilinear_joint_ban_form
from .cti import CtiLayerParams, attention_map, cti_forward, joint_representation
from .oracle import assemble_full_tensor, expanded_interaction, full_interaction
from .paralind import JointEmbeddingFactors, ParalindFactors, reconstruct_attention_tensor, reconstruct_joint_tensor
from .tensor import mode_product

__all__ = [
    "SUITES",
    "max_relative_error",
    "random_config",
    "embed_bilinear",
    "SuiteResult",
    "VerifyReport",
    "run_suite",
    "run_all",
]


def max_relative_error(actual, expected, floor: float = 1e-300) -> float:
    """``max|actual - expected| / max|expected|`` (infinity-norm relative error)."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        return float("inf")
    scale = max(float(np.max(np.abs(expected), initial=0.0)), floor)
    return float(np.max(np.abs(actual - expected), initial=0.0)) / scale


def random_config(rng: np.random.Generator, max_d: int = 6, max_n: int = 4, max_dz: int = 4,
                  slicings=(1, 2)) -> dict:
    """Random ``(n, d, d_z, R)`` with every ``d_t`` divisible by ``R``."""
    R = int(rng.choice(slicings))
    choices = [d for d in range(1, max_d + 1) if d % R == 0]
    return {
        "n": tuple(int(x) for x in rng.integers(1, max_n + 1, size=3)),
        "d": tuple(int(x) for x in rng.choice(choices, size=3)),
        "d_z": int(rng.integers(1, max_dz + 1)),
        "R": R,
    }


def _inputs(rng, cfg):
    return [rng.normal(size=(n, d)) for n, d in zip(cfg["n"], cfg["d"])]


def embed_bilinear(p: BilinearParams) -> CtiLayerParams:
    """Trilinear layer that ignores a third input fixed to ``[[1.0]]``.

    Requires ``R == 1`` since the third mode has width 1.
    """
    attn = p.attention
    if attn.R != 1:
        raise ValueError("a width-one third mode only admits R = 1")
    cores = np.asarray(attn.cores)[..., None]
    factors = (*attn.factors, np.ones((1, 1, 1)))
    joint = (*p.joint.mats, np.ones((1, p.d_z)))
    return CtiLayerParams(ParalindFactors(cores, factors), JointEmbeddingFactors(joint))


def _oracle_attention(params: CtiLayerParams, xs) -> np.ndarray:
    t = reconstruct_attention_tensor(params.attention).data
    # One mode product per modality; the remaining modes index channels.
    out = mode_product(t, xs[0], 0)
    out = mode_product(out, xs[1], 1)
    return mode_product(out, xs[2], 2).data


def _case_attention(rng, perturb):
    cfg = random_config(rng)
    params = CtiLayerParams.random(cfg["d"], cfg["d_z"], cfg["R"], rng)
    xs = _inputs(rng, cfg)
    got = attention_map(params, *xs) + perturb
    return max_relative_error(got, _oracle_attention(params, xs))


def _case_joint(rng, perturb):
    cfg = random_config(rng)
    params = CtiLayerParams.random(cfg["d"], cfg["d_z"], cfg["R"], rng)
    xs = _inputs(rng, cfg)
    att = attention_map(params, *xs)
    got = joint_representation(params, att, *xs) + perturb
    t_sc = reconstruct_joint_tensor(params.joint).data
    return max_relative_error(got, expanded_interaction(t_sc, att, *xs))


def _case_unitary(rng, perturb):
    cfg = random_config(rng, max_d=3, max_n=3, max_dz=3, slicings=(1,))
    d_z = cfg["d_z"]
    t_sc = rng.normal(size=(*cfg["d"], d_z))
    xs = _inputs(rng, cfg)
    att = rng.normal(size=cfg["n"])
    got = expanded_interaction(t_sc, att, *xs) + perturb
    return max_relative_error(got, full_interaction(assemble_full_tensor(t_sc, att), *xs))


def _case_ban(rng, perturb):
    R = int(rng.choice((1, 2)))
    d = [int(x) for x in rng.choice([x for x in range(1, 7) if x % R == 0], size=2)]
    n = [int(x) for x in rng.integers(1, 5, size=2)]
    p = BilinearParams.random(d, int(rng.integers(1, 5)), R, rng)
    v, q = (rng.normal(size=(nn, dd)) for nn, dd in zip(n, d))
    att = bilinear_attention(p, v, q)
    got = bilinear_joint(p, att, v, q) + perturb
    return max_relative_error(got, bilinear_joint_ban_form(p, att, v, q))


def _case_degenerate(rng, perturb):
    d = [int(x) for x in rng.integers(1, 7, size=2)]
    n = [int(x) for x in rng.integers(1, 5, size=2)]
    normalize = str(rng.choice(("none", "softmax")))
    p = BilinearParams.random(d, int(rng.integers(1, 5)), 1, rng)
    v, q = (rng.normal(size=(nn, dd)) for nn, dd in zip(n, d))
    z2, _ = bilinear_forward(p, v, q, normalize=normalize)
    z3, _ = cti_forward(embed_bilinear(p), v, q, np.ones((1, 1)), normalize=normalize)
    return max_relative_error(z2 + perturb, z3)


# name -> (case function, tolerance)
SUITES: dict[str, tuple[Callable, float]] = {
    "attention-map": (_case_attention, 1e-8),
    "joint-representation": (_case_joint, 1e-8),
    "unitary-attention": (_case_unitary, 1e-8),
    "ban-form": (_case_ban, 1e-10),
    "bilinear-degenerate": (_case_degenerate, 1e-8),
}


@dataclass
class SuiteResult:
    name: str
    n_cases: int
    max_rel_error: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def to_dict(self):
        return {"name": self.name, "n_cases": self.n_cases, "max_rel_error": self.max_rel_error,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class VerifyReport:
    seed: int
    results: list[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self):
        # Timings are left out so that the JSON is reproducible.
        return {"seed": self.seed, "passed": self.passed, "identities": [r.to_dict() for r in self.results]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format(self) -> str:
        lines = [f"{'identity':<22s} {'cases':>5s} {'max rel err':>12s} {'tol':>8s}  status"]
        for r in self.results:
            lines.append(f"{r.name:<22s} {r.n_cases:5d} {r.max_rel_error:12.3e} {r.tolerance:8.0e}  "
                         f"{'pass' if r.passed else 'FAIL'}")
        lines.append("all identities hold" if self.passed else "identity check FAILED")
        return "\n".join(lines)


def run_suite(name: str, n_cases: int = 100, seed: int = 0, perturb: float = 0.0) -> SuiteResult:
    """Run one identity suite on ``n_cases`` random instances.

    ``perturb`` is added to the factorized side of every comparison; it exists
    so the failure path can be exercised.
    """
    case, tol = SUITES[name]
    rng = np.random.default_rng([seed, list(SUITES).index(name)])
    start = time.perf_counter()
    worst = 0.0
    for _ in range(n_cases):
        worst = max(worst, case(rng, perturb))
    return SuiteResult(name, n_cases, worst, tol, time.perf_counter() - start)


def run_all(n_cases: int = 100, seed: int = 0, perturb: float = 0.0, names=None) -> VerifyReport:
    report = VerifyReport(seed)
    for name in names or SUITES:
        report.results.append(run_suite(name, n_cases, seed, perturb))
    return report
