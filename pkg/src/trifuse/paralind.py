"""PARALIND parameterization of interaction tensors and parameter accounting.

An attention tensor over ``N`` modes is written as a sum of ``R`` slices, each
a small Tucker core multiplied by one factor matrix per mode.  The joint
tensor uses a single slice whose core is the fixed superdiagonal identity, so
only its factor matrices are learned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, DimensionError
from .oracle import DEFAULT_SIZE_CAP, check_size
from .tensor import DenseTensor, mode_product, superdiagonal_identity

__all__ = [
    "ParalindFactors",
    "JointEmbeddingFactors",
    "check_slicing",
    "reconstruct_attention_tensor",
    "reconstruct_joint_tensor",
    "count_full_params",
    "count_decomposed_params",
    "count_attention_params",
    "count_joint_params",
    "decomposition_rate",
    "max_slicing",
]


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


def check_slicing(dims: Sequence[int], R: int) -> tuple[int, ...]:
    """Per-slice widths ``d_t / R``; raises ``ConfigError`` unless ``R`` divides every dim."""
    if R < 1:
        raise ConfigError(f"slicing parameter R must be >= 1, got {R}")
    bad = [d for d in dims if d < 1 or d % R]
    if bad:
        raise ConfigError(
            f"R={R} must divide every mode dimension {list(dims)} "
            f"(largest valid R is gcd = {math.gcd(*dims) if all(d > 0 for d in dims) else 'n/a'})")
    return tuple(d // R for d in dims)


@dataclass(frozen=True, eq=False)
class ParalindFactors:
    """Slices of a PARALIND decomposition stacked along a leading axis.

    Attributes
    ----------
    cores : ndarray, shape (R, w_1, ..., w_N)
        Tucker core of every slice.
    factors : tuple of ndarray
        One array per mode, shape ``(R, d_t, w_t)``; ``factors[t][r]`` is the
        factor matrix of mode ``t`` in slice ``r``.

    ``random`` and ``zeros`` use the slice widths ``w_t = d_t / R``; other
    widths are accepted when the arrays are given directly.  ``R`` must divide
    every ``d_t`` either way.
    """

    cores: np.ndarray
    factors: tuple

    def __post_init__(self):
        cores = _readonly(self.cores)
        factors = tuple(_readonly(f) for f in self.factors)
        if len(factors) < 2 or cores.ndim != len(factors) + 1:
            raise DimensionError(
                f"{len(factors)} factor stacks need cores with {len(factors) + 1} axes, got {cores.ndim}")
        R = cores.shape[0]
        for t, f in enumerate(factors):
            if f.ndim != 3 or f.shape[0] != R or f.shape[2] != cores.shape[t + 1]:
                raise DimensionError(
                    f"mode {t}: factor stack of shape {f.shape} does not match "
                    f"R={R} and slice width {cores.shape[t + 1]}")
        check_slicing([f.shape[1] for f in factors], R)
        object.__setattr__(self, "cores", cores)
        object.__setattr__(self, "factors", factors)

    @property
    def R(self) -> int:
        return self.cores.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[1] for f in self.factors)

    @property
    def slice_dims(self) -> tuple[int, ...]:
        return self.cores.shape[1:]

    @property
    def n_modes(self) -> int:
        return len(self.factors)

    def n_params(self) -> int:
        return self.cores.size + sum(f.size for f in self.factors)

    @classmethod
    def random(cls, dims: Sequence[int], R: int, rng: np.random.Generator) -> "ParalindFactors":
        """Zero-mean normal draws with standard deviation ``1/sqrt(fan_in)``.

        The fan-in of a factor matrix is its input dim ``d_t``; for a core it
        is the product of all but its last slice width.
        """
        widths = check_slicing(dims, R)
        core_fan_in = int(np.prod(widths[:-1]))
        cores = rng.normal(0.0, 1.0 / math.sqrt(core_fan_in), size=(R, *widths))
        factors = tuple(rng.normal(0.0, 1.0 / math.sqrt(d), size=(R, d, w))
                        for d, w in zip(dims, widths))
        return cls(cores, factors)

    @classmethod
    def zeros(cls, dims: Sequence[int], R: int) -> "ParalindFactors":
        widths = check_slicing(dims, R)
        return cls(np.zeros((R, *widths)),
                   tuple(np.zeros((R, d, w)) for d, w in zip(dims, widths)))

    def select(self, slices: Sequence[int]) -> "ParalindFactors":
        """Sub-decomposition keeping only ``slices``."""
        idx = list(slices)
        return ParalindFactors(self.cores[idx], tuple(f[idx] for f in self.factors))

    def to_dict(self) -> dict[str, Any]:
        return {
            "R": self.R,
            "dims": list(self.dims),
            "slices": [
                {"core": DenseTensor(self.cores[r]).to_dict(),
                 "factors": [DenseTensor(f[r]).to_dict() for f in self.factors]}
                for r in range(self.R)
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ParalindFactors":
        slices = obj["slices"]
        if len(slices) != int(obj["R"]):
            raise DimensionError(f"checkpoint declares R={obj['R']} but holds {len(slices)} slices")
        cores = np.stack([DenseTensor.from_dict(s["core"]).data for s in slices])
        n_modes = len(slices[0]["factors"])
        factors = tuple(
            np.stack([DenseTensor.from_dict(s["factors"][t]).data for s in slices])
            for t in range(n_modes))
        out = cls(cores, factors)
        if list(out.dims) != [int(d) for d in obj["dims"]]:
            raise DimensionError(f"checkpoint dims {obj['dims']} disagree with factor shapes {out.dims}")
        return out


@dataclass(frozen=True, eq=False)
class JointEmbeddingFactors:
    """Factor matrices ``W_z_t`` of shape ``(d_t, d_z)``, one per modality."""

    mats: tuple

    def __post_init__(self):
        mats = tuple(_readonly(m) for m in self.mats)
        if len(mats) < 2 or any(m.ndim != 2 for m in mats):
            raise DimensionError("joint embedding needs at least two factor matrices")
        if len({m.shape[1] for m in mats}) != 1:
            raise DimensionError(
                f"joint factor matrices must share d_z, got {[m.shape for m in mats]}")
        object.__setattr__(self, "mats", mats)

    @property
    def d_z(self) -> int:
        return self.mats[0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.mats)

    def n_params(self) -> int:
        return sum(m.size for m in self.mats)

    @classmethod
    def random(cls, dims: Sequence[int], d_z: int, rng: np.random.Generator):
        if d_z < 1:
            raise ConfigError(f"d_z must be >= 1, got {d_z}")
        return cls(tuple(rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, d_z)) for d in dims))

    @classmethod
    def zeros(cls, dims: Sequence[int], d_z: int):
        return cls(tuple(np.zeros((d, d_z)) for d in dims))

    def to_dict(self) -> dict[str, Any]:
        return {"d_z": self.d_z, "mats": [DenseTensor(m).to_dict() for m in self.mats]}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "JointEmbeddingFactors":
        return cls(tuple(DenseTensor.from_dict(m).data for m in obj["mats"]))


def reconstruct_attention_tensor(f: ParalindFactors, size_cap: int = DEFAULT_SIZE_CAP) -> DenseTensor:
    """Explicit ``sum_r G_r x_1 W_1r x_2 W_2r ... x_N W_Nr``."""
    check_size(f.dims, size_cap, "reconstructed attention tensor")
    total = np.zeros(f.dims)
    for r in range(f.R):
        out = f.cores[r]
        for t, w in enumerate(f.factors):
            out = mode_product(out, w[r], t).data
        total = total + out
    return DenseTensor(total)


def reconstruct_joint_tensor(f: JointEmbeddingFactors, size_cap: int = DEFAULT_SIZE_CAP) -> DenseTensor:
    """Explicit per-triplet tensor ``G_sc x_1 W_z1 ... x_N W_zN`` with superdiagonal ``G_sc``.

    The result has shape ``(d_1, ..., d_N, d_z)``.
    """
    n = len(f.mats)
    check_size((f.d_z,) * (n + 1), size_cap, "superdiagonal core")
    check_size((*f.dims, f.d_z), size_cap, "reconstructed joint tensor")
    out = superdiagonal_identity(n + 1, f.d_z).data
    for t, w in enumerate(f.mats):
        out = mode_product(out, w, t).data
    return DenseTensor(out)


def count_full_params(n: Sequence[int], d: Sequence[int], d_z: int) -> int:
    """Entries of the fully parameterized interaction tensor, ``prod(n_t d_t) * d_z``."""
    if len(n) != len(d) or any(x < 1 for x in (*n, *d, d_z)):
        raise ConfigError("channel counts and dims must be positive and paired")
    total = int(d_z)
    for nt, dt in zip(n, d):
        total *= int(nt) * int(dt)
    return total


def count_attention_params(d: Sequence[int], R: int) -> tuple[int, int]:
    """``(factor_matrix_term, core_term)`` of the attention decomposition."""
    widths = check_slicing(d, R)
    factor_term = R * sum(int(dt) * w for dt, w in zip(d, widths))
    core_term = R * math.prod(widths)
    return factor_term, core_term


def count_joint_params(d: Sequence[int], d_z: int) -> int:
    if d_z < 1:
        raise ConfigError(f"d_z must be >= 1, got {d_z}")
    return sum(int(x) for x in d) * int(d_z)


def count_decomposed_params(d: Sequence[int], d_z: int, R: int) -> int:
    """Learned entries of the attention slices plus the joint factor matrices.

    Biases and classifier heads are not included.

    >>> count_decomposed_params((2, 2, 2), 2, 1)
    32
    """
    factor_term, core_term = count_attention_params(d, R)
    return factor_term + core_term + count_joint_params(d, d_z)


def decomposition_rate(n: Sequence[int], d: Sequence[int], d_z: int, R: int) -> float:
    return count_full_params(n, d, d_z) / count_decomposed_params(d, d_z, R)


def max_slicing(d: Sequence[int]) -> int:
    if any(x < 1 for x in d):
        raise ConfigError("dims must be positive")
    return math.gcd(*(int(x) for x in d))
