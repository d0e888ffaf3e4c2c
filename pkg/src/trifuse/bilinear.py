"""Two-input reduction of the trilinear layer, in the form of a bilinear attention network.

The attention map over region/word pairs is a two-mode PARALIND sum and the
joint vector is the attention-weighted Hadamard product of the two projected
channels.  :func:`bilinear_joint_ban_form` computes the same joint vector one
output coordinate at a time through the rank-one matrices
``W_zv[:, k] W_zq[:, k]^T``; it shares no code with the Hadamard path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .cti import NORMALIZATIONS, _batched, _check_dims, _joint, _attention, _softmax_triplets
from .cti import layer_backward, layer_forward, layer_grads_to_flat
from .errors import ConfigError, DimensionError
from .paralind import JointEmbeddingFactors, ParalindFactors
from .tensor import as_array

__all__ = [
    "BilinearParams",
    "bilinear_attention",
    "bilinear_joint",
    "bilinear_joint_ban_form",
    "bilinear_forward",
]


@dataclass(frozen=True, eq=False)
class BilinearParams:
    attention: ParalindFactors
    joint: JointEmbeddingFactors

    def __post_init__(self):
        if self.attention.n_modes != 2 or len(self.joint.mats) != 2:
            raise DimensionError("a bilinear layer needs exactly two modalities")
        if self.attention.dims != self.joint.dims:
            raise DimensionError(
                f"attention dims {self.attention.dims} differ from joint dims {self.joint.dims}")

    @property
    def dims(self):
        return self.attention.dims

    @property
    def d_z(self):
        return self.joint.d_z

    @classmethod
    def random(cls, dims, d_z: int, R: int, rng: np.random.Generator) -> "BilinearParams":
        return cls(ParalindFactors.random(dims, R, rng), JointEmbeddingFactors.random(dims, d_z, rng))

    @classmethod
    def zeros(cls, dims, d_z: int, R: int) -> "BilinearParams":
        return cls(ParalindFactors.zeros(dims, R), JointEmbeddingFactors.zeros(dims, d_z))

    def flat(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {f"{prefix}attention.cores": self.attention.cores}
        for t, f in enumerate(self.attention.factors):
            out[f"{prefix}attention.factor{t}"] = f
        for t, w in enumerate(self.joint.mats):
            out[f"{prefix}joint.w{t}"] = w
        return out

    @classmethod
    def from_flat(cls, flat, prefix: str = ""):
        return cls(
            ParalindFactors(flat[f"{prefix}attention.cores"],
                            tuple(flat[f"{prefix}attention.factor{t}"] for t in range(2))),
            JointEmbeddingFactors(tuple(flat[f"{prefix}joint.w{t}"] for t in range(2))))

    def to_dict(self) -> dict[str, Any]:
        return {"attention": self.attention.to_dict(), "joint": self.joint.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(ParalindFactors.from_dict(obj["attention"]),
                   JointEmbeddingFactors.from_dict(obj["joint"]))


def bilinear_attention(p: BilinearParams, v, q, normalize: str = "none") -> np.ndarray:
    """Attention map of shape ``(n_v, n_q)`` (batched inputs give ``(B, n_v, n_q)``)."""
    if normalize not in NORMALIZATIONS:
        raise ConfigError(f"normalize must be one of {NORMALIZATIONS}, got {normalize!r}")
    xs, single = _batched((v, q))
    _check_dims(xs, p.dims, "attention")
    raw, _ = _attention(p.attention, xs)
    att = _softmax_triplets(raw) if normalize == "softmax" else raw
    return att[0] if single else att


def bilinear_joint(p: BilinearParams, att, v, q) -> np.ndarray:
    xs, single = _batched((v, q))
    _check_dims(xs, p.joint.dims, "joint embedding")
    att = as_array(att)
    if single:
        att = att[None]
    if att.shape != (xs[0].shape[0], xs[0].shape[1], xs[1].shape[1]):
        raise DimensionError(f"attention map of shape {att.shape} does not match channel counts")
    z, _ = _joint(p.joint, att, xs)
    return z[0] if single else z


def bilinear_joint_ban_form(p: BilinearParams, att, v, q) -> np.ndarray:
    """Joint vector for one example via ``z_k = sum_ij M_ij V_i (w_v,k w_q,k^T) Q_j^T``."""
    v = as_array(v)
    q = as_array(q)
    att = as_array(att)
    if v.ndim != 2 or q.ndim != 2 or att.shape != (v.shape[0], q.shape[0]):
        raise DimensionError("ban form expects single-example matrices and a matching attention map")
    wv, wq = p.joint.mats
    if v.shape[1] != wv.shape[0] or q.shape[1] != wq.shape[0]:
        raise DimensionError("feature dims do not match joint factor matrices")
    z = np.zeros(p.d_z)
    for k in range(p.d_z):
        rank_one = np.outer(wv[:, k], wq[:, k])
        pair_scores = v @ rank_one @ q.T
        z[k] = np.sum(att * pair_scores)
    return z


def bilinear_forward(p: BilinearParams, v, q, *, normalize: str = "none",
                     tape=None, prefix: str = "", input_grads: bool = False):
    """Joint vector and attention map; records the adjoint on ``tape`` if given."""
    xs, single = _batched((v, q))
    z, att, cache = layer_forward(p.attention, p.joint, xs, normalize)
    if tape is not None:
        def _back(dz):
            dz = np.asarray(dz, dtype=np.float64)
            if single:
                dz = dz[None]
            dc, df, dj, dx = layer_backward(p.attention, p.joint, cache, dz)
            grads = layer_grads_to_flat(dc, df, dj, prefix)
            if input_grads:
                for name, g in zip("vq", dx):
                    grads[f"input.{name}"] = g[0] if single else g
            return grads, None
        tape.push(_back)
    if single:
        return z[0], att[0]
    return z, att
