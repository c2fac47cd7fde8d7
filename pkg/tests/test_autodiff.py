import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emstress import autodiff as ad
from emstress.autodiff import (
    Jet2,
    Tape,
    Var,
    grad_check,
    jet_const,
    jet_input,
    mlp_forward_jet,
)


def _random_layers(sizes, rng):
    return [
        (rng.standard_normal((sizes[i + 1], sizes[i])),
         rng.standard_normal((1, sizes[i + 1])))
        for i in range(len(sizes) - 1)
    ]


def _single_hidden_closed_forms(W, b, v, c, a, j):
    """Analytic derivatives of N(a) = v . tanh(W a + b) + c with respect
    to input component j: value, dN/da_j, d2N/da_j^2.

    These mirror the closed forms d^k N / da_j^k = sum_i v_i w_ij^k o_i^(k)
    with o^(1) = 1 - o^2 and o^(2) = -2 o (1 - o^2).
    """
    z = W @ a + b
    o = np.tanh(z)
    s = 1.0 - o * o
    val = v @ o + c
    d1 = np.sum(v * W[:, j] * s)
    d2 = np.sum(v * W[:, j] ** 2 * (-2.0 * o * s))
    return val, d1, d2


@pytest.mark.parametrize("hidden", [1, 8, 64])
def test_jets_match_single_layer_closed_forms(hidden):
    rng = np.random.default_rng(hidden)
    din = 2  # (x, t)
    W = rng.standard_normal((hidden, din))
    b = rng.standard_normal(hidden)
    v = rng.standard_normal(hidden)
    c = rng.standard_normal()
    layers = [(W, b.reshape(1, -1)), (v.reshape(1, -1), np.array([[c]]))]

    a = rng.standard_normal(din)
    jet = Jet2(
        a.reshape(1, 2),
        np.array([[1.0, 0.0]]),  # d/dx seeds input 0
        np.array([[0.0, 1.0]]),  # d/dt seeds input 1
        np.zeros((1, 2)),
    )
    out = mlp_forward_jet(layers, jet)

    val, dx, dxx = _single_hidden_closed_forms(W, b, v, c, a, 0)
    _, dt, _ = _single_hidden_closed_forms(W, b, v, c, a, 1)
    assert out.value[0, 0] == pytest.approx(val, rel=1e-12)
    assert out.d_dx[0, 0] == pytest.approx(dx, rel=1e-12)
    assert out.d_dt[0, 0] == pytest.approx(dt, rel=1e-12)
    assert out.d2_dx2[0, 0] == pytest.approx(dxx, rel=1e-12)


def test_parameter_gradients_match_closed_forms():
    """Gradient of L = (d2N/dx2)^2 for a single-hidden-layer network,
    against hand-derived expressions."""
    rng = np.random.default_rng(7)
    H, din = 12, 2
    W = rng.standard_normal((H, din))
    b = rng.standard_normal(H)
    v = rng.standard_normal(H)
    c = rng.standard_normal()
    a = rng.standard_normal(din)

    tape = Tape()
    Wv = tape.leaf(W)
    bv = tape.leaf(b.reshape(1, -1))
    vv = tape.leaf(v.reshape(1, -1))
    cv = tape.leaf(np.array([[c]]))
    jet = Jet2(a.reshape(1, 2), np.array([[1.0, 0.0]]),
               np.array([[0.0, 1.0]]), np.zeros((1, 2)))
    out = mlp_forward_jet([(Wv, bv), (vv, cv)], jet)
    L = ad.square(out.d2_dx2).sum()
    tape.backward(L)

    # closed forms: d2N/dx2 = sum_i v_i w_i0^2 g(z_i), g = -2 o (1 - o^2)
    z = W @ a + b
    o = np.tanh(z)
    s = 1.0 - o * o
    g = -2.0 * o * s
    gp = -2.0 * s * s + 4.0 * o * o * s  # dg/dz
    d2 = np.sum(v * W[:, 0] ** 2 * g)
    grad_v = 2.0 * d2 * W[:, 0] ** 2 * g
    grad_b = 2.0 * d2 * v * W[:, 0] ** 2 * gp
    grad_W = np.zeros_like(W)
    grad_W[:, 0] = 2.0 * d2 * v * (2.0 * W[:, 0] * g + W[:, 0] ** 2 * gp * a[0])
    grad_W[:, 1] = 2.0 * d2 * v * W[:, 0] ** 2 * gp * a[1]

    assert np.allclose(vv.grad.ravel(), grad_v, rtol=1e-10)
    assert np.allclose(bv.grad.ravel(), grad_b, rtol=1e-10)
    assert np.allclose(Wv.grad, grad_W, rtol=1e-10)
    assert cv.grad is None or np.allclose(cv.grad, 0.0)


def _loss_fun(sizes, batch, seed):
    """Flat-parameter residual-style loss over a random multi-layer net."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((batch, sizes[0]))
    dirs = np.zeros((batch, sizes[0]))
    dirs[:, 0] = 1.0
    dts = np.zeros((batch, sizes[0]))
    dts[:, -1] = 1.0

    shapes = [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]

    def unflatten(theta, tape):
        layers, ofs = [], 0
        for o_, i_ in shapes:
            W = tape.leaf(theta[ofs : ofs + o_ * i_].reshape(o_, i_)); ofs += o_ * i_
            bb = tape.leaf(theta[ofs : ofs + o_].reshape(1, o_)); ofs += o_
            layers.append((W, bb))
        return layers

    n = sum(o_ * i_ + o_ for o_, i_ in shapes)

    def fun(theta):
        tape = Tape()
        layers = unflatten(theta, tape)
        jet = Jet2(X, dirs, dts, np.zeros_like(X))
        out = mlp_forward_jet(layers, jet)
        r = out.d_dt - 0.3 * out.d2_dx2 - 0.1 * (out.d_dx * out.value)
        L = ad.mean(ad.square(r)) + ad.mean(ad.square(out.value))
        tape.backward(L)
        grad = np.concatenate(
            [np.concatenate([W.grad.ravel(), bb.grad.ravel()]) for W, bb in layers]
        )
        return float(L.value), grad

    theta0 = 0.5 * np.random.default_rng(seed + 1).standard_normal(n)
    return fun, theta0


@pytest.mark.parametrize("sizes", [[3, 10, 1], [3, 16, 16, 1], [2, 8, 8, 8, 1]])
def test_multi_layer_gradients_vs_finite_differences(sizes):
    fun, theta0 = _loss_fun(sizes, batch=20, seed=sizes[1])
    assert grad_check(fun, theta0, n_samples=30, step=1e-6, seed=0) < 1e-5


def test_jet_derivatives_vs_finite_differences():
    rng = np.random.default_rng(3)
    layers = _random_layers([2, 10, 10, 1], rng)
    x = np.array([[0.4, -0.2]])

    def f(xv, tv):
        jet = Jet2(np.array([[xv, tv]]), np.array([[1.0, 0.0]]),
                   np.array([[0.0, 1.0]]), np.zeros((1, 2)))
        return mlp_forward_jet(layers, jet)

    out = f(0.4, -0.2)
    h = 1e-5
    fp = f(0.4 + h, -0.2).value[0, 0]
    fm = f(0.4 - h, -0.2).value[0, 0]
    ft = f(0.4, -0.2 + h).value[0, 0]
    fmt = f(0.4, -0.2 - h).value[0, 0]
    assert out.d_dx[0, 0] == pytest.approx((fp - fm) / (2 * h), rel=1e-7)
    assert out.d_dt[0, 0] == pytest.approx((ft - fmt) / (2 * h), rel=1e-7)
    assert out.d2_dx2[0, 0] == pytest.approx(
        (fp - 2 * out.value[0, 0] + fm) / h**2, rel=1e-4
    )


def test_jet_product_leibniz():
    # jets of u = x^2 (per-sample) and w = x: (u w)'' = 6x
    x = np.array([[0.7], [-1.3]])
    u = Jet2(x**2, 2 * x, np.zeros_like(x), 2 * np.ones_like(x))
    w = Jet2(x, np.ones_like(x), np.zeros_like(x), np.zeros_like(x))
    p = u.mul(w)
    assert np.allclose(p.value, x**3)
    assert np.allclose(p.d_dx, 3 * x**2)
    assert np.allclose(p.d2_dx2, 6 * x)


def test_tape_backward_requires_scalar():
    tape = Tape()
    x = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ValueError):
        tape.backward(x)


def test_tape_determinism():
    def run():
        tape = Tape()
        rng = np.random.default_rng(0)
        a = tape.leaf(rng.standard_normal((5, 3)))
        b = tape.leaf(rng.standard_normal((3, 4)))
        out = ad.mean(ad.square(ad.tanh(a @ b) + 0.5))
        tape.backward(out)
        return a.grad.copy(), b.grad.copy()

    g1a, g1b = run()
    g2a, g2b = run()
    assert np.array_equal(g1a, g2a) and np.array_equal(g1b, g2b)


def test_mixed_numpy_var_arithmetic_dispatches_to_var():
    tape = Tape()
    v = tape.leaf(np.ones((2, 2)))
    c = np.full((2, 2), 3.0)
    for expr in (c * v, v * c, c + v, v + c, c - v, v - c):
        assert isinstance(expr, Var)
    out = (c * v).sum()
    tape.backward(out)
    assert np.allclose(v.grad, c)


def test_concat_and_getcol_gradients():
    tape = Tape()
    a = tape.leaf(np.arange(4.0).reshape(2, 2))
    const = np.ones((2, 1))
    joined = ad.concat([a, const], axis=1)
    col = ad.getcol(joined, 1)
    out = ad.square(col).sum()
    tape.backward(out)
    expect = np.zeros((2, 2))
    expect[:, 1] = 2 * a.value[:, 1]
    assert np.allclose(a.grad, expect)


def test_division_by_var_rejected():
    tape = Tape()
    a = tape.leaf(np.ones(2))
    b = tape.leaf(np.ones(2))
    with pytest.raises(TypeError):
        a / b


def test_grad_check_rejects_bad_step():
    with pytest.raises(ValueError):
        grad_check(lambda x: (0.0, x), np.ones(3), step=0.0)


def test_jet_const_has_zero_derivatives():
    j = jet_const(np.ones((3, 1)))
    assert np.all(j.d_dx == 0) and np.all(j.d_dt == 0) and np.all(j.d2_dx2 == 0)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_gradients_match_fd_property(seed):
    fun, theta0 = _loss_fun([2, 6, 1], batch=8, seed=seed % 1000)
    assert grad_check(fun, theta0, n_samples=10, step=1e-6, seed=seed % 97) < 1e-4


@given(
    st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
)
@settings(max_examples=50, deadline=None)
def test_jet_input_seeding(xv, tv):
    jet = jet_input(np.array([[xv], [tv]]), 1.0, 0.0)
    assert np.all(jet.d_dx == 1.0)
    assert np.all(jet.d_dt == 0.0)
    assert np.all(jet.d2_dx2 == 0.0)
