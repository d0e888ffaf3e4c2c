import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trifuse.bilinear import (BilinearParams, bilinear_attention, bilinear_forward, bilinear_joint,
                              bilinear_joint_ban_form)
from trifuse.cti import attention_map, cti_forward
from trifuse.errors import DimensionError
from trifuse.paralind import JointEmbeddingFactors, ParalindFactors
from trifuse.verify import embed_bilinear

from helpers import rel_err


def _vq(rng, n=(3, 2), d=(4, 2)):
    return [rng.normal(size=(nn, dd)) for nn, dd in zip(n, d)]


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_ban_form_identity(seed, R):
    rng = np.random.default_rng(seed)
    d = tuple(int(x) for x in rng.choice([2, 4, 6], size=2))
    p = BilinearParams.random(d, int(rng.integers(1, 6)), R, rng)
    v, q = _vq(rng, tuple(rng.integers(1, 5, size=2)), d)
    att = bilinear_attention(p, v, q)
    assert rel_err(bilinear_joint(p, att, v, q), bilinear_joint_ban_form(p, att, v, q)) < 1e-10


@pytest.mark.parametrize("normalize", ["none", "softmax"])
def test_degenerate_third_modality(rng, normalize):
    p = BilinearParams.random((4, 2), 3, 1, rng)
    v, q = _vq(rng)
    one = np.ones((1, 1))
    att3 = attention_map(embed_bilinear(p), v, q, one, normalize=normalize)
    assert rel_err(bilinear_attention(p, v, q, normalize=normalize), att3[..., 0]) < 1e-8
    z2, _ = bilinear_forward(p, v, q, normalize=normalize)
    z3, _ = cti_forward(embed_bilinear(p), v, q, one, normalize=normalize)
    assert rel_err(z2, z3) < 1e-8


def test_embedding_needs_single_slice(rng):
    with pytest.raises(ValueError):
        embed_bilinear(BilinearParams.random((4, 2), 3, 2, rng))


def test_zero_v_gives_zero_map(rng):
    p = BilinearParams.random((4, 2), 3, 2, rng)
    v, q = _vq(rng)
    assert not bilinear_attention(p, np.zeros_like(v), q).any()


def test_scalar_map():
    attn = ParalindFactors(np.full((1, 1, 1), 2.0), (np.full((1, 1, 1), 3.0), np.full((1, 1, 1), -0.5)))
    p = BilinearParams(attn, JointEmbeddingFactors.zeros((1, 1), 2))
    m = bilinear_attention(p, [[1.0], [2.0]], [[4.0]])
    np.testing.assert_allclose(m, 2.0 * np.array([[3.0 * 1.0 * -0.5 * 4.0], [3.0 * 2.0 * -0.5 * 4.0]]))


def test_one_hot_map_gives_hadamard(rng):
    p = BilinearParams.random((4, 2), 3, 2, rng)
    v, q = _vq(rng)
    att = np.zeros((3, 2))
    att[2, 1] = 1.0
    want = (v[2] @ p.joint.mats[0]) * (q[1] @ p.joint.mats[1])
    np.testing.assert_allclose(bilinear_joint(p, att, v, q), want, rtol=1e-14)


def test_zero_params(rng):
    p = BilinearParams.zeros((4, 2), 3, 2)
    z, att = bilinear_forward(p, *_vq(rng))
    assert not z.any() and not att.any()


def test_ban_form_validates(rng):
    p = BilinearParams.random((4, 2), 3, 1, rng)
    v, q = _vq(rng)
    with pytest.raises(DimensionError):
        bilinear_joint_ban_form(p, np.zeros((2, 2)), v, q)


def test_three_modes_rejected(rng):
    with pytest.raises(DimensionError):
        BilinearParams(ParalindFactors.random((2, 2, 2), 1, rng), JointEmbeddingFactors.random((2, 2, 2), 2, rng))
