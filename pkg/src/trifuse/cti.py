"""Compact trilinear interaction layer.

The attention map over channel triplets comes from the PARALIND slices: each
modality is projected once per slice (``M_t @ W_tr``) and the projections are
contracted against the slice core.  The joint vector is the attention-weighted
sum of Hadamard products of the three projected channels, so neither the
attention tensor nor the per-triplet tensor is ever materialized.

Inputs may be single examples (``n x d`` matrices) or batches
(``B x n x d`` arrays); outputs follow the same convention.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, DimensionError
from .paralind import JointEmbeddingFactors, ParalindFactors
from .tensor import DenseTensor, as_array

__all__ = [
    "NORMALIZATIONS",
    "AttentionMap",
    "CtiLayerParams",
    "attention_map",
    "joint_representation",
    "cti_forward",
    "layer_forward",
    "layer_backward",
]

NORMALIZATIONS = ("none", "softmax")

_CHANNEL = "ijklmn"
_SLICE = "pqstuv"


def _batched(inputs: Sequence) -> tuple[list[np.ndarray], bool]:
    arrs = [as_array(x) for x in inputs]
    ndims = {a.ndim for a in arrs}
    if ndims == {2}:
        return [a[None] for a in arrs], True
    if ndims == {3}:
        if len({a.shape[0] for a in arrs}) != 1:
            raise DimensionError(f"batch sizes differ: {[a.shape[0] for a in arrs]}")
        return arrs, False
    raise DimensionError(f"inputs must all be n x d or all be B x n x d, got ndims {sorted(ndims)}")


def _check_dims(arrs, dims, what):
    got = tuple(a.shape[-1] for a in arrs)
    if got != tuple(dims):
        raise DimensionError(f"{what}: input feature dims {got} do not match parameter dims {tuple(dims)}")


def _attention_subscripts(n: int):
    core = "r" + _SLICE[:n]
    projs = ["br" + _CHANNEL[t] + _SLICE[t] for t in range(n)]
    out = "b" + _CHANNEL[:n]
    return core, projs, out


def _joint_subscripts(n: int):
    att = "b" + _CHANNEL[:n]
    projs = ["b" + _CHANNEL[t] + "z" for t in range(n)]
    return att, projs, "bz"


def _chain(subs: Sequence[str], ops: Sequence[np.ndarray], out: str) -> np.ndarray:
    """Contract ``ops`` left to right, two at a time, keeping only indices still needed.

    Pairwise contractions avoid the slow many-operand einsum loops; callers
    order the operands so no intermediate grows large.
    """
    cur_sub, cur = subs[0], ops[0]
    for i in range(1, len(ops)):
        needed = set(out).union(*subs[i + 1:])
        keep = "".join(ch for ch in dict.fromkeys(cur_sub + subs[i]) if ch in needed)
        cur = np.einsum(f"{cur_sub},{subs[i]}->{keep}", cur, ops[i])
        cur_sub = keep
    if cur_sub != out:
        cur = np.einsum(f"{cur_sub}->{out}", cur)
    return cur


def _softmax_triplets(att: np.ndarray) -> np.ndarray:
    flat = att.reshape(att.shape[0], -1)
    e = np.exp(flat - flat.max(axis=1, keepdims=True))
    return (e / e.sum(axis=1, keepdims=True)).reshape(att.shape)


def _attention(attn: ParalindFactors, xs):
    n = len(xs)
    projs = [np.einsum("bnd,rde->brne", x, w) for x, w in zip(xs, attn.factors)]
    core, proj_sub, out = _attention_subscripts(n)
    raw = _chain([core, *proj_sub], [attn.cores, *projs], out)
    return raw, projs


def _joint(joint: JointEmbeddingFactors, att, xs):
    n = len(xs)
    projs = [x @ w for x, w in zip(xs, joint.mats)]
    att_sub, proj_sub, out = _joint_subscripts(n)
    z = _chain([att_sub, *proj_sub], [att, *projs], out)
    return z, projs


def layer_forward(attn: ParalindFactors, joint: JointEmbeddingFactors, xs, normalize="none"):
    """Batched forward over ``len(xs)`` modalities; returns ``(z, att, cache)``."""
    if normalize not in NORMALIZATIONS:
        raise ConfigError(f"normalize must be one of {NORMALIZATIONS}, got {normalize!r}")
    if attn.n_modes != len(xs) or len(joint.mats) != len(xs):
        raise DimensionError(f"parameters cover {attn.n_modes} modalities, got {len(xs)} inputs")
    _check_dims(xs, attn.dims, "attention")
    _check_dims(xs, joint.dims, "joint embedding")
    raw, att_projs = _attention(attn, xs)
    att = _softmax_triplets(raw) if normalize == "softmax" else raw
    z, joint_projs = _joint(joint, att, xs)
    cache = {"xs": xs, "att": att, "att_projs": att_projs,
             "joint_projs": joint_projs, "normalize": normalize}
    return z, att, cache


def layer_backward(attn: ParalindFactors, joint: JointEmbeddingFactors, cache, dz, datt=None):
    """Adjoint of :func:`layer_forward`.

    Returns ``(d_cores, d_factors, d_joint, d_inputs)`` where the last three
    are tuples ordered by modality.  ``datt`` adds an upstream gradient on the
    returned attention map.
    """
    xs, att = cache["xs"], cache["att"]
    n = len(xs)
    jp = cache["joint_projs"]
    att_sub, jsub, _ = _joint_subscripts(n)

    d_att = _chain(["bz", *jsub], [dz, *jp], att_sub)
    if datt is not None:
        d_att = d_att + datt
    d_joint, d_inputs = [], []
    for t in range(n):
        others = [(jsub[s], jp[s]) for s in range(n) if s != t]
        d_proj = _chain([att_sub, *(s for s, _ in others), "bz"],
                        [att, *(p for _, p in others), dz], jsub[t])
        d_joint.append(np.einsum("bnd,bnz->dz", xs[t], d_proj))
        d_inputs.append(d_proj @ joint.mats[t].T)

    if cache["normalize"] == "softmax":
        s = att.reshape(att.shape[0], -1)
        g = d_att.reshape(s.shape)
        d_att = (s * (g - (s * g).sum(axis=1, keepdims=True))).reshape(att.shape)

    ap = cache["att_projs"]
    core, psub, out = _attention_subscripts(n)
    d_cores = _chain([out, *psub], [d_att, *ap], core)
    d_factors = []
    for t in range(n):
        others = [(psub[s], ap[s]) for s in range(n) if s != t]
        d_proj = _chain([out, *(s for s, _ in others), core],
                        [d_att, *(p for _, p in others), attn.cores], psub[t])
        d_factors.append(np.einsum("bnd,brne->rde", xs[t], d_proj))
        d_inputs[t] = d_inputs[t] + np.einsum("brne,rde->bnd", d_proj, attn.factors[t])
    return d_cores, tuple(d_factors), tuple(d_joint), tuple(d_inputs)


@dataclass(frozen=True, eq=False)
class AttentionMap:
    """Triplet weights ``M[i, j, k]`` of one example, exportable as JSON."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", DenseTensor(self.weights).data)

    @property
    def shape(self):
        return self.weights.shape

    def top(self, k: int = 5) -> list[tuple[tuple[int, ...], float]]:
        flat = self.weights.ravel()
        order = np.argsort(-flat, kind="stable")[:k]
        return [(tuple(int(i) for i in np.unravel_index(o, self.shape)), float(flat[o])) for o in order]

    def to_dict(self) -> dict[str, Any]:
        return DenseTensor(self.weights).to_dict()


@dataclass(frozen=True, eq=False)
class CtiLayerParams:
    """Attention slices over ``(d_v, d_q, d_a)`` and the joint factor matrices to ``d_z``."""

    attention: ParalindFactors
    joint: JointEmbeddingFactors

    def __post_init__(self):
        if self.attention.n_modes != 3 or len(self.joint.mats) != 3:
            raise DimensionError("a trilinear layer needs three modalities")
        if self.attention.dims != self.joint.dims:
            raise DimensionError(
                f"attention dims {self.attention.dims} differ from joint dims {self.joint.dims}")

    @property
    def dims(self):
        return self.attention.dims

    @property
    def d_z(self):
        return self.joint.d_z

    @property
    def R(self):
        return self.attention.R

    @classmethod
    def random(cls, dims, d_z: int, R: int, rng: np.random.Generator) -> "CtiLayerParams":
        return cls(ParalindFactors.random(dims, R, rng), JointEmbeddingFactors.random(dims, d_z, rng))

    @classmethod
    def zeros(cls, dims, d_z: int, R: int) -> "CtiLayerParams":
        return cls(ParalindFactors.zeros(dims, R), JointEmbeddingFactors.zeros(dims, d_z))

    def flat(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {f"{prefix}attention.cores": self.attention.cores}
        for t, f in enumerate(self.attention.factors):
            out[f"{prefix}attention.factor{t}"] = f
        for t, w in enumerate(self.joint.mats):
            out[f"{prefix}joint.w{t}"] = w
        return out

    @classmethod
    def from_flat(cls, flat, prefix: str = "", n_modes: int = 3):
        attn = ParalindFactors(
            flat[f"{prefix}attention.cores"],
            tuple(flat[f"{prefix}attention.factor{t}"] for t in range(n_modes)))
        joint = JointEmbeddingFactors(tuple(flat[f"{prefix}joint.w{t}"] for t in range(n_modes)))
        return cls(attn, joint)

    def to_dict(self) -> dict[str, Any]:
        return {"attention": self.attention.to_dict(), "joint": self.joint.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(ParalindFactors.from_dict(obj["attention"]),
                   JointEmbeddingFactors.from_dict(obj["joint"]))


def layer_grads_to_flat(d_cores, d_factors, d_joint, prefix: str = "") -> dict[str, np.ndarray]:
    out = {f"{prefix}attention.cores": d_cores}
    for t, g in enumerate(d_factors):
        out[f"{prefix}attention.factor{t}"] = g
    for t, g in enumerate(d_joint):
        out[f"{prefix}joint.w{t}"] = g
    return out


def attention_map(params: CtiLayerParams, v, q, a, normalize: str = "none") -> np.ndarray:
    """Raw (or softmax-normalized) triplet attention of shape ``(n_v, n_q, n_a)``."""
    xs, single = _batched((v, q, a))
    _check_dims(xs, params.dims, "attention")
    if normalize not in NORMALIZATIONS:
        raise ConfigError(f"normalize must be one of {NORMALIZATIONS}, got {normalize!r}")
    raw, _ = _attention(params.attention, xs)
    att = _softmax_triplets(raw) if normalize == "softmax" else raw
    return att[0] if single else att


def joint_representation(params: CtiLayerParams, att, v, q, a) -> np.ndarray:
    """Attention-weighted sum of Hadamard products of the projected channels."""
    xs, single = _batched((v, q, a))
    _check_dims(xs, params.joint.dims, "joint embedding")
    att = as_array(att)
    if single:
        att = att[None]
    expected = (xs[0].shape[0], *(x.shape[1] for x in xs))
    if att.shape != expected:
        raise DimensionError(f"attention map of shape {att.shape[1:] if single else att.shape}, "
                             f"expected {expected[1:] if single else expected}")
    z, _ = _joint(params.joint, att, xs)
    return z[0] if single else z


def cti_forward(params: CtiLayerParams, v, q, a, *, normalize: str = "none",
                tape=None, prefix: str = "", input_grads: bool = False):
    """Joint vector ``z`` and attention map for one example or a batch.

    With ``tape`` set, the stage adjoint is recorded; its upstream gradient is
    ``dL/dz`` with the same shape as ``z``.
    """
    xs, single = _batched((v, q, a))
    z, att, cache = layer_forward(params.attention, params.joint, xs, normalize)
    if tape is not None:
        def _back(dz):
            dz = np.asarray(dz, dtype=np.float64)
            if single:
                dz = dz[None]
            dc, df, dj, dx = layer_backward(params.attention, params.joint, cache, dz)
            grads = layer_grads_to_flat(dc, df, dj, prefix)
            if input_grads:
                for name, g in zip("vqa", dx):
                    grads[f"input.{name}"] = g[0] if single else g
            return grads, None
        tape.push(_back)
    if single:
        return z[0], att[0]
    return z, att
