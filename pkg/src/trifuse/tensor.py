"""Dense n-way tensors and the handful of products the interaction models need.

Modes are numbered from 0, as numpy axes are.  A matrix ``u`` of shape
``(J, I)`` contracts its columns against a mode of extent ``I`` and leaves an
extent of ``J`` in its place; a 1-d array (a row vector) contracts the mode
away entirely.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DimensionError

__all__ = [
    "DenseTensor",
    "ModalityFeatures",
    "ROLES",
    "as_array",
    "mode_product",
    "vectorize",
    "devectorize",
    "hadamard",
    "superdiagonal_identity",
]

ROLES = ("V", "Q", "A", "generic")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable float64 tensor stored in row-major order.

    Parameters
    ----------
    data : array_like
        Values; copied on construction and made read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.data)
        if arr.ndim < 1:
            raise DimensionError("a tensor needs at least one mode")
        if 0 in arr.shape:
            raise DimensionError(f"all extents must be >= 1, got {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __repr__(self):
        return f"DenseTensor(shape={self.shape})"

    def allclose(self, other, rtol=1e-10, atol=0.0) -> bool:
        other = as_array(other)
        return other.shape == self.shape and np.allclose(self.data, other, rtol=rtol, atol=atol)

    def to_dict(self) -> dict[str, Any]:
        return {"shape": list(self.shape), "data": self.data.ravel().tolist()}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "DenseTensor":
        shape = tuple(int(s) for s in obj["shape"])
        flat = np.asarray(obj["data"], dtype=np.float64)
        if flat.size != int(np.prod(shape)):
            raise DimensionError(
                f"data length {flat.size} does not match shape {list(shape)}")
        return cls(flat.reshape(shape))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DenseTensor":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ModalityFeatures:
    """Channel matrix of one input: ``n`` channels, each a ``d``-dim row."""

    channels: np.ndarray
    role: str = "generic"

    def __post_init__(self):
        arr = _frozen(self.channels)
        if arr.ndim != 2 or 0 in arr.shape:
            raise DimensionError(
                f"modality features must be a non-empty n x d matrix, got shape {arr.shape}")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        object.__setattr__(self, "channels", arr)

    @property
    def n(self) -> int:
        return self.channels.shape[0]

    @property
    def d(self) -> int:
        return self.channels.shape[1]

    def row(self, e: int) -> np.ndarray:
        return self.channels[e]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.channels
        return self.channels.astype(dtype)


def as_array(x) -> np.ndarray:
    """Plain float64 view of a tensor, feature matrix or array-like."""
    if isinstance(x, DenseTensor):
        return x.data
    if isinstance(x, ModalityFeatures):
        return x.channels
    return np.asarray(x, dtype=np.float64)


def mode_product(t, u, mode: int) -> DenseTensor:
    """Contract mode ``mode`` of ``t`` with ``u``.

    Examples
    --------
    >>> mode_product([[1., 2.], [3., 4.]], [1., 1.], 0).data
    array([4., 6.])
    """
    t = as_array(t)
    u = as_array(u)
    if not 0 <= mode < t.ndim:
        raise DimensionError(f"mode {mode} out of range for a {t.ndim}-way tensor")
    if u.ndim == 1:
        if u.shape[0] != t.shape[mode]:
            raise DimensionError(
                f"mode {mode}: vector of length {u.shape[0]} cannot contract extent {t.shape[mode]}")
        out = np.tensordot(t, u, axes=([mode], [0]))
        if out.ndim == 0:
            out = out.reshape(1)
        return DenseTensor(out)
    if u.ndim == 2:
        if u.shape[1] != t.shape[mode]:
            raise DimensionError(
                f"mode {mode}: matrix with {u.shape[1]} columns cannot contract extent {t.shape[mode]}")
        out = np.tensordot(u, t, axes=([1], [mode]))
        return DenseTensor(np.moveaxis(out, 0, mode))
    raise DimensionError(f"mode {mode}: expected a vector or matrix, got {u.ndim}-d operand")


def vectorize(m) -> np.ndarray:
    """Flatten a channel matrix channel by channel into one row vector."""
    return as_array(m).reshape(-1).copy()


def devectorize(vec, n: int, d: int, role: str = "generic") -> ModalityFeatures:
    vec = as_array(vec)
    if vec.shape != (n * d,):
        raise DimensionError(f"vector of shape {vec.shape} cannot hold {n} x {d} channels")
    return ModalityFeatures(vec.reshape(n, d), role)


def hadamard(a, b) -> np.ndarray:
    a = as_array(a)
    b = as_array(b)
    if a.shape != b.shape:
        raise DimensionError(f"hadamard product of shapes {a.shape} and {b.shape}")
    return a * b


def superdiagonal_identity(order: int, dim: int) -> DenseTensor:
    """Order-``order`` tensor with ones where every index coincides."""
    if order < 2 or dim < 1:
        raise ValueError("order must be >= 2 and dim >= 1")
    out = np.zeros((dim,) * order)
    idx = np.arange(dim)
    out[(idx,) * order] = 1.0
    return DenseTensor(out)
