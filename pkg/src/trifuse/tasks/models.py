"""Classifier models built on the interaction layers.

Every model exposes ``params()`` (a flat name -> array dict), ``with_params``
(a new model from such a dict) and ``logits(...)``.  Multiple-choice scorers
have a single output and return logits of shape ``(B,)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..bilinear import BilinearParams, bilinear_forward
from ..cti import CtiLayerParams, cti_forward, layer_backward, layer_forward, layer_grads_to_flat
from ..cti import _batched
from ..errors import ConfigError, DimensionError
from ..tensor import DenseTensor

__all__ = ["LinearHead", "CtiModel", "BilinearModel", "PairConcatModel", "model_from_dict"]

CHECKPOINT_FORMAT = "trifuse-checkpoint/1"


@dataclass(frozen=True, eq=False)
class LinearHead:
    weight: np.ndarray  # (d_in, n_out)
    bias: np.ndarray    # (n_out,)

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise DimensionError(f"head weight {w.shape} and bias {b.shape} do not match")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @classmethod
    def random(cls, d_in: int, n_out: int, rng: np.random.Generator) -> "LinearHead":
        return cls(rng.normal(0.0, 1.0 / math.sqrt(d_in), size=(d_in, n_out)), np.zeros(n_out))

    def forward(self, z, tape=None, prefix="head."):
        z = np.asarray(z, dtype=np.float64)
        out = z @ self.weight + self.bias
        if tape is not None:
            def _back(g):
                g = np.asarray(g, dtype=np.float64)
                zz, gg = (z[None], g[None]) if z.ndim == 1 else (z, g)
                grads = {f"{prefix}weight": zz.T @ gg, f"{prefix}bias": gg.sum(axis=0)}
                return grads, g @ self.weight.T
            tape.push(_back)
        return out

    def to_dict(self):
        return {"weight": DenseTensor(self.weight).to_dict(), "bias": DenseTensor(self.bias).to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(DenseTensor.from_dict(obj["weight"]).data, DenseTensor.from_dict(obj["bias"]).data)


def _squeeze_scores(out, tape):
    # Binary scorers expose (B,) logits; reshape the upstream gradient to match.
    if tape is not None:
        tape.push(lambda g: ({}, np.asarray(g, dtype=np.float64)[..., None]))
    return out[..., 0]


def _head_params(head, out):
    out["head.weight"] = head.weight
    out["head.bias"] = head.bias
    return out


@dataclass(frozen=True, eq=False)
class CtiModel:
    """Trilinear layer over ``(V, Q, A)`` followed by a linear classifier."""

    layer: CtiLayerParams
    head: LinearHead
    normalize: str = "none"
    kind = "cti"

    @property
    def binary(self) -> bool:
        return self.head.weight.shape[1] == 1

    @classmethod
    def random(cls, dims, d_z, R, n_out, rng, normalize="none"):
        return cls(CtiLayerParams.random(dims, d_z, R, rng), LinearHead.random(d_z, n_out, rng), normalize)

    def params(self) -> dict[str, np.ndarray]:
        return _head_params(self.head, self.layer.flat())

    def with_params(self, flat) -> "CtiModel":
        return CtiModel(CtiLayerParams.from_flat(flat), LinearHead(flat["head.weight"], flat["head.bias"]),
                        self.normalize)

    def logits(self, v, q, a, tape=None):
        z, _ = cti_forward(self.layer, v, q, a, normalize=self.normalize, tape=tape)
        out = self.head.forward(z, tape)
        return _squeeze_scores(out, tape) if self.binary else out

    def attention(self, v, q, a):
        return cti_forward(self.layer, v, q, a, normalize=self.normalize)[1]

    def to_dict(self) -> dict[str, Any]:
        return {"model": self.kind, "normalize": self.normalize,
                "layer": self.layer.to_dict(), "head": self.head.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(CtiLayerParams.from_dict(obj["layer"]), LinearHead.from_dict(obj["head"]),
                   obj.get("normalize", "none"))


@dataclass(frozen=True, eq=False)
class BilinearModel:
    """Bilinear layer over ``(V, Q)`` and a linear classifier; the distillation student."""

    layer: BilinearParams
    head: LinearHead
    normalize: str = "none"
    kind = "bilinear"

    @classmethod
    def random(cls, dims, d_z, R, n_out, rng, normalize="none"):
        return cls(BilinearParams.random(dims, d_z, R, rng), LinearHead.random(d_z, n_out, rng), normalize)

    def params(self):
        return _head_params(self.head, self.layer.flat())

    def with_params(self, flat):
        return BilinearModel(BilinearParams.from_flat(flat), LinearHead(flat["head.weight"], flat["head.bias"]),
                             self.normalize)

    def logits(self, v, q, a=None, tape=None):
        z, _ = bilinear_forward(self.layer, v, q, normalize=self.normalize, tape=tape)
        return self.head.forward(z, tape)

    def to_dict(self):
        return {"model": self.kind, "normalize": self.normalize,
                "layer": self.layer.to_dict(), "head": self.head.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(BilinearParams.from_dict(obj["layer"]), LinearHead.from_dict(obj["head"]),
                   obj.get("normalize", "none"))


@dataclass(frozen=True, eq=False)
class PairConcatModel:
    """Pairwise baseline: bilinear joints of (V, Q) and (V, A), concatenated, then a linear scorer."""

    vq: BilinearParams
    va: BilinearParams
    head: LinearHead
    normalize: str = "none"
    kind = "pair-concat"

    def __post_init__(self):
        if self.head.weight.shape[0] != self.vq.d_z + self.va.d_z:
            raise DimensionError("head input must equal the concatenated joint width")

    @property
    def binary(self) -> bool:
        return self.head.weight.shape[1] == 1

    @classmethod
    def random(cls, dims, d_z, R, n_out, rng, normalize="none"):
        d_v, d_q, d_a = dims
        return cls(BilinearParams.random((d_v, d_q), d_z, R, rng),
                   BilinearParams.random((d_v, d_a), d_z, R, rng),
                   LinearHead.random(2 * d_z, n_out, rng), normalize)

    def params(self):
        out = self.vq.flat("vq.")
        out.update(self.va.flat("va."))
        return _head_params(self.head, out)

    def with_params(self, flat):
        return PairConcatModel(BilinearParams.from_flat(flat, "vq."), BilinearParams.from_flat(flat, "va."),
                               LinearHead(flat["head.weight"], flat["head.bias"]), self.normalize)

    def logits(self, v, q, a, tape=None):
        (v3, q3), single = _batched((v, q))
        (_, a3), _ = _batched((v, a))
        z1, _, c1 = layer_forward(self.vq.attention, self.vq.joint, [v3, q3], self.normalize)
        z2, _, c2 = layer_forward(self.va.attention, self.va.joint, [v3, a3], self.normalize)
        z = np.concatenate([z1, z2], axis=1)
        if single:
            z = z[0]
        if tape is not None:
            d1 = self.vq.d_z

            def _back(dz):
                dz = np.asarray(dz, dtype=np.float64)
                if single:
                    dz = dz[None]
                grads = layer_grads_to_flat(*layer_backward(self.vq.attention, self.vq.joint, c1, dz[:, :d1])[:3],
                                            prefix="vq.")
                grads.update(layer_grads_to_flat(
                    *layer_backward(self.va.attention, self.va.joint, c2, dz[:, d1:])[:3], prefix="va."))
                return grads, None
            tape.push(_back)
        out = self.head.forward(z, tape)
        return _squeeze_scores(out, tape) if self.binary else out

    def to_dict(self):
        return {"model": self.kind, "normalize": self.normalize, "vq": self.vq.to_dict(),
                "va": self.va.to_dict(), "head": self.head.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(BilinearParams.from_dict(obj["vq"]), BilinearParams.from_dict(obj["va"]),
                   LinearHead.from_dict(obj["head"]), obj.get("normalize", "none"))


_MODELS = {m.kind: m for m in (CtiModel, BilinearModel, PairConcatModel)}


def model_from_dict(obj):
    try:
        cls = _MODELS[obj["model"]]
    except KeyError:
        raise ConfigError(f"unknown model type {obj.get('model')!r}") from None
    return cls.from_dict(obj)
