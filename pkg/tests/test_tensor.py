import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trifuse.errors import DimensionError
from trifuse.tensor import (DenseTensor, ModalityFeatures, devectorize, hadamard, mode_product,
                            superdiagonal_identity, vectorize)

from helpers import rel_err

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_mode_product_hand_contraction():
    out = mode_product([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0], 0)
    np.testing.assert_array_equal(out.data, [4.0, 6.0])


def test_mode_product_zero_vector_gives_zeros(rng):
    t = rng.normal(size=(3, 4, 2))
    assert not mode_product(t, np.zeros(4), 1).data.any()


def test_mode_product_identity_matrix_is_noop():
    t = np.eye(2)
    np.testing.assert_array_equal(mode_product(t, np.eye(2), 0).data, t)


def test_mode_product_matrix_replaces_extent(rng):
    t = rng.normal(size=(3, 4, 2))
    u = rng.normal(size=(5, 4))
    out = mode_product(t, u, 1).data
    assert out.shape == (3, 5, 2)
    np.testing.assert_allclose(out, np.einsum("ajc,bj->abc", t, u), rtol=1e-12)


def test_mode_product_errors_name_the_mode():
    with pytest.raises(DimensionError, match="mode 1"):
        mode_product(np.ones((2, 3)), np.ones(2), 1)
    with pytest.raises(DimensionError):
        mode_product(np.ones((2, 3)), np.ones(2), 5)


@given(arrays(np.float64, (3, 4, 2), elements=finite), arrays(np.float64, 4, elements=finite),
       arrays(np.float64, 4, elements=finite), finite, finite)
def test_mode_product_linear(t, u, w, a, b):
    lhs = mode_product(t, a * u + b * w, 1).data
    rhs = a * mode_product(t, u, 1).data + b * mode_product(t, w, 1).data
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-9)


@given(arrays(np.float64, (3, 4, 2), elements=finite), arrays(np.float64, (2, 3), elements=finite),
       arrays(np.float64, (5, 4), elements=finite))
def test_mode_products_commute_across_modes(t, u, w):
    a = mode_product(mode_product(t, u, 0), w, 1).data
    b = mode_product(mode_product(t, w, 1), u, 0).data
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-9)


def test_vectorize_examples():
    np.testing.assert_array_equal(vectorize([[1, 2], [3, 4]]), [1, 2, 3, 4])
    np.testing.assert_array_equal(vectorize([[5, 6]]), [5, 6])
    np.testing.assert_array_equal(vectorize(np.zeros((2, 3))), np.zeros(6))


@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_devectorize_inverts_vectorize(n, d, data):
    m = data.draw(arrays(np.float64, (n, d), elements=finite))
    back = devectorize(vectorize(m), n, d, "Q")
    np.testing.assert_array_equal(back.channels, m)
    assert back.role == "Q" and (back.n, back.d) == (n, d)


def test_hadamard_examples():
    np.testing.assert_array_equal(hadamard([1, 2], [3, 4]), [3, 8])
    a = np.array([1.5, -2.0, 3.0])
    np.testing.assert_array_equal(hadamard(a, np.ones(3)), a)
    np.testing.assert_array_equal(hadamard(a, np.zeros(3)), np.zeros(3))
    with pytest.raises(DimensionError):
        hadamard([1, 2], [1, 2, 3])


def test_superdiagonal_identity():
    np.testing.assert_array_equal(superdiagonal_identity(2, 2).data, np.eye(2))
    t = superdiagonal_identity(3, 2).data
    assert t[0, 0, 0] == t[1, 1, 1] == 1.0
    assert t.sum() == 2.0
    assert superdiagonal_identity(4, 5).data.sum() == 5


def test_dense_tensor_is_immutable_and_serializes(rng):
    src = rng.normal(size=(2, 3, 2))
    t = DenseTensor(src)
    src[0, 0, 0] = 99.0
    assert t.data[0, 0, 0] != 99.0
    with pytest.raises(ValueError):
        t.data[0, 0, 0] = 1.0
    obj = json.loads(t.to_json())
    assert obj["shape"] == [2, 3, 2]
    assert obj["data"][:3] == t.data.ravel()[:3].tolist()  # row-major
    np.testing.assert_array_equal(DenseTensor.from_json(t.to_json()).data, t.data)


def test_dense_tensor_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        DenseTensor.from_dict({"shape": [2, 2], "data": [1, 2, 3]})
    with pytest.raises(DimensionError):
        DenseTensor(np.zeros((0, 2)))


def test_modality_features_validates():
    with pytest.raises(DimensionError):
        ModalityFeatures(np.zeros(3))
    with pytest.raises(ValueError):
        ModalityFeatures(np.zeros((2, 2)), role="X")
    m = ModalityFeatures(np.arange(6.0).reshape(3, 2), "V")
    np.testing.assert_array_equal(m.row(1), [2.0, 3.0])
    assert rel_err(np.asarray(m), np.arange(6.0).reshape(3, 2)) == 0.0
