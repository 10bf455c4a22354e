import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionsphere import autodiff as ad

from conftest import finite_difference, rel_err


def check_op(fn, *arrays, h=1e-5, tol=1e-6):
    """Compare grad of sum(fn(...) * w) with central differences for each input."""
    r = np.random.default_rng(7)
    with ad.no_grad():
        out_shape = fn(*[ad.Tensor(a) for a in arrays]).shape
    w = r.standard_normal(out_shape)
    for k in range(len(arrays)):

        def scalar(x, k=k):
            args = [ad.Tensor(x if i == k else a) for i, a in enumerate(arrays)]
            return float(np.sum(fn(*args).data * w))

        ts = [ad.Tensor(a, requires_grad=True) for a in arrays]
        g = ad.grad(ad.sum_(fn(*ts) * w), ts[k]).data
        assert rel_err(g, finite_difference(scalar, arrays[k], h)) < tol


def test_forward_examples():
    np.testing.assert_array_equal(ad.relu(ad.Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])
    a = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(ad.matmul(np.eye(2), ad.Tensor(a)).data, a)
    assert ad.leaky_relu(ad.Tensor(-5.0), 0.2).data == -1.0


def test_backward_examples(rng):
    x = ad.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    np.testing.assert_array_equal(ad.grad(ad.sum_(x), x).data, np.ones((3, 4)))
    n = ad.l2_norm(x)
    np.testing.assert_allclose(ad.grad(n * n, x).data, 2 * x.data, rtol=1e-12)
    ad.backward(ad.sum_(x * 3.0), [x])
    np.testing.assert_array_equal(x.grad, np.full((3, 4), 3.0))


def test_grad_requires_scalar(rng):
    x = ad.Tensor(rng.standard_normal(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.grad(x * 2.0, x)


def test_unused_input_gets_zero_gradient():
    x = ad.Tensor(np.ones(2), requires_grad=True)
    y = ad.Tensor(np.ones(3), requires_grad=True)
    assert np.array_equal(ad.grad(ad.sum_(x), y).data, np.zeros(3))


OPS = [
    ("add_broadcast", lambda a, b: a + b, [(3, 4), (4,)]),
    ("sub_broadcast", lambda a, b: a - b, [(2, 3, 4), (3, 1)]),
    ("mul", lambda a, b: a * b, [(3, 4), (3, 4)]),
    ("div", lambda a, b: a / b, [(3, 4), (1, 4)]),
    ("scale", lambda a: ad.scale(a, -2.5), [(5,)]),
    ("tanh", ad.tanh, [(3, 4)]),
    ("leaky_relu", lambda a: ad.leaky_relu(a, 0.2), [(4, 5)]),
    ("relu", ad.relu, [(4, 5)]),
    ("sum_axis", lambda a: ad.sum_(a, axis=1, keepdims=True), [(3, 4, 2)]),
    ("mean", lambda a: ad.mean(a, axis=0), [(3, 4)]),
    ("reshape", lambda a: ad.reshape(a, (6, 2)), [(3, 4)]),
    ("swap_last", ad.swap_last, [(2, 3, 4)]),
    ("slice", lambda a: a[:, 1:3], [(3, 4)]),
    ("concat", lambda a, b: ad.concat([a, b], axis=1), [(2, 3), (2, 2)]),
    ("matmul", ad.matmul, [(3, 4), (4, 2)]),
    ("batched_matmul", ad.matmul, [(2, 3, 4), (4, 2)]),
    ("expand", lambda a: ad.expand(a, (3, 4)), [(1, 4)]),
    ("l2_norm", lambda a: ad.l2_norm(a, axis=1), [(3, 4)]),
    ("nuclear_norm", ad.nuclear_norm, [(4, 3, 3)]),
]


def op_inputs(name, shapes):
    r = np.random.default_rng(zlib.crc32(name.encode()))
    arrays = [r.standard_normal(s) for s in shapes]
    if name == "div":
        arrays[1] = np.abs(arrays[1]) + 0.5
    if name in ("relu", "leaky_relu"):
        # Keep clear of the kink.
        arrays[0] = np.where(np.abs(arrays[0]) < 0.05, 0.3, arrays[0])
    return arrays


@pytest.mark.parametrize("name,fn,shapes", OPS)
def test_op_gradients_match_finite_differences(name, fn, shapes):
    check_op(fn, *op_inputs(name, shapes))


def test_positive_domain_ops():
    r = np.random.default_rng(3)
    x = r.uniform(0.2, 3.0, (4, 3))
    check_op(ad.sqrt, x)
    check_op(ad.cos_sqrt, x)
    check_op(ad.sinc_sqrt, x)
    check_op(lambda a: ad.clamp_min(a, 1.0), x)
    check_op(lambda a: ad.l1_norm(a - 1.6), x)


def test_sinc_sqrt_series_region():
    x = np.array([0.0, 1e-8, 1e-5, 5e-5, 2e-4])
    np.testing.assert_allclose(ad.sinc_sqrt(x).data, np.sinc(np.sqrt(x) / np.pi), rtol=1e-14)
    t = ad.Tensor(x, requires_grad=True)
    g = ad.grad(ad.sum_(ad.sinc_sqrt(t)), t).data
    safe = np.maximum(x, 1e-300)
    exact = np.where(x < 1e-6, -1 / 6 + x / 60, (np.cos(np.sqrt(safe)) - np.sinc(np.sqrt(safe) / np.pi)) / (2 * safe))
    np.testing.assert_allclose(g, exact, rtol=1e-8)


def test_two_layer_net_gradients(rng):
    x = rng.standard_normal((6, 5))
    params = [rng.standard_normal(s) * 0.5 for s in [(5, 7), (7,), (7, 1), (1,)]]

    def net(ps):
        h = ad.tanh(ad.Tensor(x) @ ps[0] + ps[1])
        return ad.sum_(h @ ps[2] + ps[3])

    ts = [ad.Tensor(p, requires_grad=True) for p in params]
    grads = ad.grad(net(ts), ts)
    for i, p in enumerate(params):

        def f(v, i=i):
            ps = [ad.Tensor(v if j == i else q) for j, q in enumerate(params)]
            return float(net(ps).data)

        assert rel_err(grads[i].data, finite_difference(f, p, 1e-4)) < 1e-5


def test_input_gradient_examples(rng):
    w = rng.standard_normal(5)
    x = rng.standard_normal(5)
    g = ad.input_gradient(lambda t: ad.sum_(t * w), x)
    assert np.array_equal(g.data, w)
    g = ad.input_gradient(lambda t: ad.scale(ad.sum_(t * t), 0.5), x)
    np.testing.assert_array_equal(g.data, x)


def test_double_backward_quadratic(rng):
    a = rng.standard_normal((4, 3))
    x0 = rng.standard_normal((3, 1))
    x = ad.Tensor(x0, requires_grad=True)
    y = ad.matmul(a, x)
    f = ad.sum_(y * y)
    (g,) = ad.grad(f, [x], create_graph=True)
    np.testing.assert_allclose(g.data, 2 * a.T @ a @ x0, rtol=1e-12)
    second = ad.grad(ad.sum_(g * g), x).data
    ata = a.T @ a
    np.testing.assert_allclose(second, 8 * ata @ ata @ x0, rtol=1e-12)


def test_penalty_parameter_gradient(rng):
    x = rng.standard_normal((4, 6))
    params = [rng.standard_normal(s) * 0.7 for s in [(6, 5), (5,), (5, 1), (1,)]]

    def penalty(ps):
        def d(t):
            return ad.sum_(ad.tanh(t @ ps[0] + ps[1]) @ ps[2] + ps[3])

        g = ad.input_gradient(d, x)
        norms = ad.sqrt(ad.sum_(g * g, axis=1))
        return ad.mean((norms - 1.0) * (norms - 1.0))

    ts = [ad.Tensor(p, requires_grad=True) for p in params]
    grads = ad.grad(penalty(ts), ts)
    # The output bias does not move the input gradient.
    assert np.all(grads[3].data == 0)
    for i, p in enumerate(params[:3]):

        def f(v, i=i):
            ps = [ad.Tensor(v if j == i else q) for j, q in enumerate(params)]
            return float(penalty(ps).data)

        assert rel_err(grads[i].data, finite_difference(f, p, 1e-5)) < 1e-4


def test_gradients_deterministic(rng):
    x0 = rng.standard_normal((3, 3))

    def run():
        x = ad.Tensor(x0, requires_grad=True)
        return ad.grad(ad.sum_(ad.tanh(x @ x) * x), x).data

    assert run().tobytes() == run().tobytes()


def test_no_grad_builds_no_graph():
    x = ad.Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        y = x * 2.0
    assert not y.requires_grad


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_gradient_is_linear_in_the_output(seed, a, b):
    r = np.random.default_rng(seed)
    x0, w = r.standard_normal((2, 3, 4))
    x = ad.Tensor(x0, requires_grad=True)
    f = ad.sum_(ad.tanh(x) * w)
    g = ad.sum_(x * x)
    combined = ad.grad(f * a + g * b, x).data
    separate = a * ad.grad(f, x).data + b * ad.grad(g, x).data
    np.testing.assert_allclose(combined, separate, atol=1e-12)
