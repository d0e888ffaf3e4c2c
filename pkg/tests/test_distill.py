import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trifuse.distill import DistillConfig, kd_loss, kd_terms, softened_softmax, teacher_student_step
from trifuse.errors import ConfigError
from trifuse.grad import Tape, backward, finite_difference_check
from trifuse.losses import bce_with_logits, cross_entropy, log_softmax, sigmoid, softmax
from trifuse.tasks.models import BilinearModel, CtiModel

logits_st = arrays(np.float64, 5, elements=st.floats(-30, 30))


def test_softened_softmax_examples():
    np.testing.assert_allclose(softened_softmax([1.0, 1.0], 7.0), [0.5, 0.5])
    x = np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(softened_softmax(x, 1.0), np.exp(x) / np.exp(x).sum(), rtol=1e-14)
    np.testing.assert_allclose(softened_softmax([0.0, math.log(3.0)], 1.0), [0.25, 0.75], rtol=1e-15)
    with pytest.raises(ConfigError):
        softened_softmax([1.0], 0.0)


@given(logits_st, st.floats(-100, 100), st.sampled_from([0.5, 1.0, 3.0]))
def test_softmax_shift_invariant(x, c, T):
    np.testing.assert_allclose(softened_softmax(x + c, T), softened_softmax(x, T), atol=1e-12)


@given(logits_st)
def test_large_temperature_is_uniform(x):
    assert np.max(np.abs(softened_softmax(x, 1e6) - 0.2)) < 1e-5


def test_config_validation():
    assert DistillConfig().temperature == 3.0
    for bad in ({"alpha": -0.1}, {"alpha": 1.5}, {"temperature": 0.0}, {"temperature": -1.0}):
        with pytest.raises(ConfigError):
            DistillConfig(**bad)


def test_alpha_zero_is_hard_cross_entropy(rng):
    s, t = rng.normal(size=(4, 5)), rng.normal(size=(4, 5))
    y = rng.integers(0, 5, size=4)
    assert kd_loss(s, t, y, DistillConfig(0.0, 3.0)) == cross_entropy(s, y)


def test_alpha_one_equal_logits_is_entropy():
    assert kd_loss([0.0, 0.0], [0.0, 0.0], 0, DistillConfig(1.0, 1.0)) == pytest.approx(math.log(2), abs=1e-15)


@given(st.floats(0, 1), st.sampled_from([1.0, 2.0, 3.0]), st.integers(0, 1000))
def test_mixture_is_exact(alpha, T, seed):
    rng = np.random.default_rng(seed)
    s, t = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    y = rng.integers(0, 4, size=3)
    soft, hard = kd_terms(s, t, y, T)
    assert kd_loss(s, t, y, DistillConfig(alpha, T)) == alpha * soft + (1 - alpha) * hard


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("T", [1.0, 3.0])
def test_kd_gradient(rng, alpha, T):
    s, t = rng.normal(size=(3, 4)), 3 * rng.normal(size=(3, 4))
    y = rng.integers(0, 4, size=3)
    cfg = DistillConfig(alpha, T)
    tape = Tape()
    tape.push(lambda g: ({"s": g}, None))  # exposes dL/d(logits) as a parameter gradient
    kd_loss(s, t, y, cfg, tape=tape)
    rep = finite_difference_check(lambda p: kd_loss(p["s"], t, y, cfg), {"s": s}, backward(tape))
    assert rep.passed(1e-4)


def test_bad_labels_raise(rng):
    with pytest.raises(IndexError):
        kd_loss(rng.normal(size=(2, 3)), rng.normal(size=(2, 3)), [0, 3])


def _ffoe_batch(rng, B=4, C=3):
    return {"v": rng.normal(size=(B, 2, 4)), "q": rng.normal(size=(B, 3, 2)), "a": rng.normal(size=(B, 2, 2)),
            "y": rng.integers(0, C, size=B)}


def test_step_alpha_zero_is_supervised_step(rng):
    teacher = CtiModel.random((4, 2, 2), 3, 1, 3, rng)
    student = BilinearModel.random((4, 2), 3, 2, 3, rng)
    batch = _ffoe_batch(rng)
    loss, grads = teacher_student_step(teacher, student, batch, DistillConfig(0.0, 3.0))
    tape = Tape()
    ce = cross_entropy(student.logits(batch["v"], batch["q"], tape=tape), batch["y"], tape=tape)
    ref = backward(tape)
    assert loss == ce
    for k in ref:
        np.testing.assert_allclose(grads[k], ref[k], rtol=1e-12, atol=1e-15)


def test_step_gradients_and_frozen_teacher(rng):
    teacher = CtiModel.random((4, 2, 2), 3, 1, 3, rng, "softmax")
    student = BilinearModel.random((4, 2), 3, 2, 3, rng, "softmax")
    before = {k: v.copy() for k, v in teacher.params().items()}
    batch = _ffoe_batch(rng)
    cfg = DistillConfig(0.5, 3.0)
    _, grads = teacher_student_step(teacher, student, batch, cfg)
    assert set(grads) == set(student.params())
    t_logits = teacher.logits(batch["v"], batch["q"], batch["a"])

    def loss(flat):
        return kd_loss(student.with_params(flat).logits(batch["v"], batch["q"]), t_logits, batch["y"], cfg)

    assert finite_difference_check(loss, student.params(), grads).passed(1e-4)
    for k, v in teacher.params().items():
        np.testing.assert_array_equal(v, before[k])


def test_loss_primitives(rng):
    x = rng.normal(size=(3, 4))
    np.testing.assert_allclose(np.exp(log_softmax(x)), softmax(x), rtol=1e-14)
    np.testing.assert_allclose(sigmoid([-800.0, 0.0, 800.0]), [0.0, 0.5, 1.0])
    assert cross_entropy(np.zeros(5), 2) == pytest.approx(math.log(5))
    assert bce_with_logits(np.zeros(3), np.array([0.0, 1.0, 1.0])) == pytest.approx(math.log(2))
    with pytest.raises(IndexError):
        cross_entropy(np.zeros((1, 3)), [3])
