"""Finite-difference checks and numpy/scipy oracles for the autodiff tape."""

import numpy as np
import pytest
import scipy.special

from graphloc import autodiff as ad
from graphloc.autodiff import Tensor, parameter


def fd_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of one array."""
    out = np.zeros_like(x)
    flat = out.reshape(-1)
    xi = x.reshape(-1)
    for i in range(xi.size):
        orig = xi[i]
        xi[i] = orig + h
        hi = f(x)
        xi[i] = orig - h
        lo = f(x)
        xi[i] = orig
        flat[i] = (hi - lo) / (2 * h)
    return out


def check_unary(op, x, rtol=1e-6, atol=1e-9):
    """Analytic gradient of sum(op(x)) vs finite differences."""
    t = parameter(x.copy())
    out = ad.sum_(op(t))
    ad.backward(out)

    def scalar(arr):
        return float(ad.sum_(op(Tensor(arr))).value)

    np.testing.assert_allclose(t.grad, fd_grad(scalar, x.copy()),
                               rtol=rtol, atol=atol)


# ---------------------------------------------------------------------------
# arithmetic and broadcasting


def test_add_mul_broadcast_forward(rng):
    a = rng.normal(size=(3, 1, 4))
    b = rng.normal(size=(5, 1))
    ta, tb = Tensor(a), Tensor(b)
    np.testing.assert_array_equal((ta + tb).value, a + b)
    np.testing.assert_array_equal((ta * tb).value, a * b)
    np.testing.assert_array_equal((ta - tb).value, a - b)
    np.testing.assert_allclose((ta / (tb + Tensor(10.0))).value, a / (b + 10.0))


def test_broadcast_gradients_unbroadcast(rng):
    a = rng.normal(size=(3, 1, 4))
    b = rng.normal(size=(5, 1))
    ta, tb = parameter(a), parameter(b)
    out = ad.sum_(ta * tb)
    ad.backward(out)
    assert ta.grad.shape == a.shape
    assert tb.grad.shape == b.shape
    # d/da sum(a*b) = sum of b over the broadcast axes
    np.testing.assert_allclose(ta.grad, np.broadcast_to(b, (3, 5, 4)).sum(axis=1, keepdims=True))
    np.testing.assert_allclose(tb.grad, np.broadcast_to(a, (3, 5, 4)).sum(axis=(0, 2)).reshape(5, 1))


def test_division_gradient(rng):
    a = rng.normal(size=(4,)) + 3.0
    b = rng.normal(size=(4,)) + 3.0
    ta, tb = parameter(a.copy()), parameter(b.copy())
    ad.backward(ad.sum_(ta / tb))
    np.testing.assert_allclose(ta.grad, 1.0 / b, rtol=1e-12)
    np.testing.assert_allclose(tb.grad, -a / b ** 2, rtol=1e-12)


def test_scalar_operand_promotion():
    t = parameter(np.array([1.0, 2.0]))
    out = ad.sum_(2.0 * t + 1.0)
    ad.backward(out)
    np.testing.assert_array_equal(t.grad, [2.0, 2.0])


def test_negation():
    t = parameter(np.array([1.0, -2.0]))
    ad.backward(ad.sum_(-t))
    np.testing.assert_array_equal(t.grad, [-1.0, -1.0])


# ---------------------------------------------------------------------------
# matmul


def test_matmul_forward_matches_numpy(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 5))
    np.testing.assert_allclose((Tensor(a) @ Tensor(b)).value, a @ b)
    # batched with broadcast over the leading axis
    a3 = rng.normal(size=(7, 3, 4))
    np.testing.assert_allclose((Tensor(a3) @ Tensor(b)).value, a3 @ b)


def test_matmul_gradients_vs_fd(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    ta, tb = parameter(a.copy()), parameter(b.copy())
    w = rng.normal(size=(3, 2))  # weighting makes the check non-symmetric
    ad.backward(ad.sum_(Tensor(w) * (ta @ tb)))
    np.testing.assert_allclose(ta.grad, fd_grad(lambda x: float((x @ b * w).sum()), a.copy()),
                               rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(tb.grad, fd_grad(lambda x: float((a @ x * w).sum()), b.copy()),
                               rtol=1e-6, atol=1e-9)


def test_batched_matmul_broadcast_gradient(rng):
    a = rng.normal(size=(5, 3, 4))
    b = rng.normal(size=(4, 2))  # shared across the batch
    ta, tb = parameter(a.copy()), parameter(b.copy())
    ad.backward(ad.sum_(ta @ tb))
    assert tb.grad.shape == (4, 2)
    np.testing.assert_allclose(tb.grad, fd_grad(lambda x: float((a @ x).sum()), b.copy()),
                               rtol=1e-6, atol=1e-8)


def test_matmul_rejects_vectors():
    with pytest.raises(ValueError):
        Tensor(np.ones(3)) @ Tensor(np.ones((3, 2)))


# ---------------------------------------------------------------------------
# indexing, reshaping, concatenation


def test_getitem_gradient_scatters(rng):
    x = parameter(rng.normal(size=(6, 3)))
    idx = np.array([0, 2, 2, 5])  # repeated row: gradients must accumulate
    out = ad.sum_(x[idx])
    ad.backward(out)
    expected = np.zeros((6, 3))
    for i in idx:
        expected[i] += 1.0
    np.testing.assert_array_equal(x.grad, expected)


def test_getitem_slice_and_pair_indexing(rng):
    x = parameter(rng.normal(size=(4, 5)))
    ad.backward(ad.sum_(x[1:3]))
    assert x.grad[0].sum() == 0 and x.grad[3].sum() == 0
    assert np.all(x.grad[1:3] == 1.0)

    y = parameter(rng.normal(size=(4, 5)))
    rows = np.array([0, 3])
    cols = np.array([1, 2])
    ad.backward(ad.sum_(y[rows, cols]))
    expected = np.zeros((4, 5))
    expected[0, 1] = expected[3, 2] = 1.0
    np.testing.assert_array_equal(y.grad, expected)


def test_reshape_transpose_round_trip(rng):
    x = parameter(rng.normal(size=(2, 3, 4)))
    out = ad.transpose(ad.reshape(x, (6, 4)), (1, 0))
    assert out.shape == (4, 6)
    w = rng.normal(size=(4, 6))
    ad.backward(ad.sum_(Tensor(w) * out))
    np.testing.assert_array_equal(x.grad, w.T.reshape(2, 3, 4))


def test_broadcast_to_gradient(rng):
    x = parameter(rng.normal(size=(1, 4)))
    ad.backward(ad.sum_(ad.broadcast_to(x, (5, 4))))
    np.testing.assert_array_equal(x.grad, np.full((1, 4), 5.0))


def test_concat_forward_and_gradient(rng):
    a = parameter(rng.normal(size=(2, 3)))
    b = parameter(rng.normal(size=(4, 3)))
    out = ad.concat([a, b], axis=0)
    np.testing.assert_array_equal(out.value, np.concatenate([a.value, b.value]))
    w = rng.normal(size=(6, 3))
    ad.backward(ad.sum_(Tensor(w) * out))
    np.testing.assert_array_equal(a.grad, w[:2])
    np.testing.assert_array_equal(b.grad, w[2:])


def test_sum_and_mean_axes(rng):
    x = rng.normal(size=(3, 4))
    t = Tensor(x)
    np.testing.assert_allclose(ad.sum_(t, axis=0).value, x.sum(axis=0))
    np.testing.assert_allclose(ad.mean(t, axis=1).value, x.mean(axis=1))
    np.testing.assert_allclose(ad.mean(t).value, x.mean())
    p = parameter(x.copy())
    ad.backward(ad.mean(p))
    np.testing.assert_allclose(p.grad, np.full_like(x, 1.0 / x.size))


# ---------------------------------------------------------------------------
# nonlinearities vs scipy and finite differences


def test_unary_gradients(rng):
    x = rng.normal(size=(3, 4))
    check_unary(ad.tanh, x.copy())
    check_unary(ad.sigmoid, x.copy())
    check_unary(ad.gelu, x.copy())
    check_unary(ad.softplus, x.copy())
    check_unary(ad.exp, x.copy() * 0.5)
    check_unary(ad.log, np.abs(x) + 1.0)
    check_unary(lambda t: ad.power(t, 3.0), x.copy())
    check_unary(ad.sqrt, np.abs(x) + 0.5)


def test_relu_forward_and_grad():
    x = np.array([-2.0, -0.5, 0.5, 3.0])
    t = parameter(x.copy())
    out = ad.relu(t)
    np.testing.assert_array_equal(out.value, [0, 0, 0.5, 3.0])
    ad.backward(ad.sum_(out))
    np.testing.assert_array_equal(t.grad, [0, 0, 1, 1])


def test_sigmoid_matches_scipy(rng):
    x = rng.normal(size=20) * 3
    np.testing.assert_allclose(ad.sigmoid(Tensor(x)).value, scipy.special.expit(x), rtol=1e-12)


def test_softplus_is_stable_at_extremes():
    x = np.array([-800.0, 0.0, 800.0])
    v = ad.softplus(Tensor(x)).value
    assert v[0] == 0.0
    assert v[1] == pytest.approx(np.log(2.0))
    assert v[2] == pytest.approx(800.0)
    assert np.all(np.isfinite(v))


def test_softmax_matches_scipy(rng):
    x = rng.normal(size=(4, 7)) * 3
    np.testing.assert_allclose(ad.softmax(Tensor(x)).value,
                               scipy.special.softmax(x, axis=-1), rtol=1e-12)
    np.testing.assert_allclose(ad.log_softmax(Tensor(x)).value,
                               scipy.special.log_softmax(x, axis=-1), rtol=1e-12)
    assert ad.softmax(Tensor(x)).value.sum(axis=-1) == pytest.approx(np.ones(4))


def test_softmax_gradient_vs_fd(rng):
    x = rng.normal(size=(2, 5))
    w = rng.normal(size=(2, 5))
    t = parameter(x.copy())
    ad.backward(ad.sum_(Tensor(w) * ad.softmax(t)))
    np.testing.assert_allclose(
        t.grad,
        fd_grad(lambda a: float((scipy.special.softmax(a, axis=-1) * w).sum()), x.copy()),
        rtol=1e-5, atol=1e-9)


def test_log_softmax_gradient_vs_fd(rng):
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(3, 4))
    t = parameter(x.copy())
    ad.backward(ad.sum_(Tensor(w) * ad.log_softmax(t)))
    np.testing.assert_allclose(
        t.grad,
        fd_grad(lambda a: float((scipy.special.log_softmax(a, axis=-1) * w).sum()), x.copy()),
        rtol=1e-5, atol=1e-9)


def test_softmax_shift_invariance(rng):
    x = rng.normal(size=(2, 6))
    np.testing.assert_allclose(ad.softmax(Tensor(x)).value,
                               ad.softmax(Tensor(x + 100.0)).value, rtol=1e-12)


# ---------------------------------------------------------------------------
# tape mechanics


def test_shared_subexpression_accumulates():
    x = parameter(np.array(3.0))
    y = x * x + x  # dy/dx = 2x + 1 = 7
    ad.backward(y)
    assert x.grad == pytest.approx(7.0)


def test_diamond_graph():
    x = parameter(np.array(2.0))
    a = x * Tensor(3.0)
    b = x * Tensor(5.0)
    out = a * b  # d/dx 15x^2 = 30x = 60
    ad.backward(out)
    assert x.grad == pytest.approx(60.0)


def test_gradients_accumulate_across_backward_calls():
    x = parameter(np.array(1.0))
    ad.backward(x * Tensor(2.0))
    ad.backward(x * Tensor(3.0))
    assert x.grad == pytest.approx(5.0)
    ad.zero_grads([x])
    assert x.grad is None


def test_intermediate_grads_are_freed():
    x = parameter(np.array([1.0, 2.0]))
    mid = x * Tensor(2.0)
    out = ad.sum_(mid)
    ad.backward(out)
    assert mid.grad is None  # only leaves with requires_grad keep gradients
    assert x.grad is not None


def test_backward_with_seed():
    x = parameter(np.array([1.0, 2.0, 3.0]))
    out = x * Tensor(2.0)
    ad.backward(out, seed=np.array([1.0, 0.0, -1.0]))
    np.testing.assert_array_equal(x.grad, [2.0, 0.0, -2.0])


def test_float64_everywhere():
    t = Tensor(np.array([1, 2], dtype=np.int64))
    assert t.value.dtype == np.float64
    t32 = Tensor(np.array([1.5], dtype=np.float32))
    assert t32.value.dtype == np.float64
