"""Brute-force trilinear interactions.

These are ground truth for the factorized layer and are only usable at tiny
sizes: the fully parameterized tensor has ``(n1 d1)(n2 d2)(n3 d3) d_z``
entries.  Every function here goes through explicit mode products.
"""
from __future__ import annotations

import itertools
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionError, OracleScaleError
from .tensor import as_array, mode_product, vectorize

__all__ = [
    "DEFAULT_SIZE_CAP",
    "check_size",
    "full_interaction",
    "triplet_interaction",
    "iter_triplets",
    "unitary_attention_combine",
    "expanded_interaction",
    "assemble_full_tensor",
]

DEFAULT_SIZE_CAP = 10**7


def check_size(shape: Sequence[int], size_cap: int = DEFAULT_SIZE_CAP, what: str = "tensor"):
    size = 1
    for s in shape:
        size *= int(s)
    if size > size_cap:
        raise OracleScaleError(
            f"{what} of shape {tuple(shape)} has {size} entries (cap {size_cap}); "
            "use the factorized layer in trifuse.cti instead")


def _contract_rows(t: np.ndarray, rows: Sequence[np.ndarray]) -> np.ndarray:
    # Each product drops mode 0, so the next input always meets mode 0.
    out = t
    for r in rows:
        out = mode_product(out, r, 0).data
    return out


def full_interaction(t, m1, m2, m3, size_cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """Joint vector of the fully parameterized interaction over three inputs.

    Parameters
    ----------
    t : array_like, shape (n1*d1, n2*d2, n3*d3, d_z)
        Interaction tensor acting on the vectorized inputs.
    m1, m2, m3 : ModalityFeatures or array_like
        Channel matrices.

    Returns
    -------
    ndarray, shape (d_z,)
    """
    t = as_array(t)
    check_size(t.shape, size_cap, "full interaction tensor")
    vecs = [vectorize(m) for m in (m1, m2, m3)]
    if t.ndim != 4 or tuple(t.shape[:3]) != tuple(v.size for v in vecs):
        raise DimensionError(
            f"tensor of shape {t.shape} does not match vectorized inputs "
            f"{tuple(v.size for v in vecs)}")
    return _contract_rows(t, vecs)


def triplet_interaction(t_sc, m1i, m2j, m3k) -> np.ndarray:
    """Joint vector of one channel triplet under the per-triplet tensor."""
    t_sc = as_array(t_sc)
    rows = [as_array(r).reshape(-1) for r in (m1i, m2j, m3k)]
    if t_sc.ndim != 4 or tuple(t_sc.shape[:3]) != tuple(r.size for r in rows):
        raise DimensionError(
            f"triplet tensor of shape {t_sc.shape} does not match channel dims "
            f"{tuple(r.size for r in rows)}")
    return _contract_rows(t_sc, rows)


def iter_triplets(n1: int, n2: int, n3: int) -> Iterator[tuple[int, int, int]]:
    """Triplets ``(i, j, k)`` in row-major order; ``k`` varies fastest."""
    return itertools.product(range(n1), range(n2), range(n3))


def unitary_attention_combine(zps: Sequence[np.ndarray], weights) -> np.ndarray:
    """Weighted sum of per-triplet joint vectors, accumulated in triplet order."""
    w = as_array(weights).reshape(-1)
    if len(zps) != w.size:
        raise DimensionError(f"{len(zps)} triplet vectors but {w.size} attention weights")
    if not len(zps):
        raise DimensionError("no triplets to combine")
    z = np.zeros_like(np.asarray(zps[0], dtype=np.float64))
    for wp, zp in zip(w, zps):
        z = z + wp * zp
    return z


def expanded_interaction(t_sc, attention, m1, m2, m3) -> np.ndarray:
    """Attention-weighted sum of triplet interactions over all channel triplets.

    Accumulation order matches ``unitary_attention_combine`` applied to the
    triplet vectors in ``iter_triplets`` order, so the two agree bit for bit.
    """
    mats = [as_array(m) for m in (m1, m2, m3)]
    att = as_array(attention)
    shape = tuple(m.shape[0] for m in mats)
    if att.shape != shape:
        raise DimensionError(f"attention map of shape {att.shape}, channel counts {shape}")
    t_sc = as_array(t_sc)
    z = np.zeros(t_sc.shape[-1])
    for i, j, k in iter_triplets(*shape):
        zp = triplet_interaction(t_sc, mats[0][i], mats[1][j], mats[2][k])
        z = z + att[i, j, k] * zp
    return z


def assemble_full_tensor(t_sc, attention, size_cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """Full tensor acting blockwise as ``attention[i,j,k] * t_sc`` on each triplet.

    With this tensor ``full_interaction`` reproduces ``expanded_interaction``
    for inputs with the matching channel counts.
    """
    t_sc = as_array(t_sc)
    att = as_array(attention)
    d1, d2, d3, dz = t_sc.shape
    n1, n2, n3 = att.shape
    check_size((n1 * d1, n2 * d2, n3 * d3, dz), size_cap, "assembled full tensor")
    full = np.einsum("ijk,abcp->iajbkcp", att, t_sc)
    return full.reshape(n1 * d1, n2 * d2, n3 * d3, dz)
