"""Scalar automatic differentiation for the residual losses.

Two pieces:

* forward-mode truncated-Taylor "jets" carrying {value, d/dx, d/dt,
  d2/dx2} of a batch of scalar outputs with respect to the network
  inputs (the only derivatives the stress residual needs), and
* a recording tape over numpy arrays giving exact reverse-mode gradients
  of any scalar built from recorded operations with respect to every
  parameter -- including parameters reached only through the jets'
  second-order components ("reverse over forward").

All arithmetic is float64; gradient accumulation follows the fixed
recording order, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Tape", "Var", "Jet2", "value_of", "concat", "getcol",
           "mlp_forward_jet", "jet_input", "jet_const", "grad_check"]


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape of the operand it belongs to."""
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


class Tape:
    """Records operations in creation order; ``backward`` replays them in
    reverse, accumulating gradients deterministically."""

    def __init__(self):
        self.nodes: list[Var] = []

    def leaf(self, value) -> "Var":
        return Var(value, self)

    def backward(self, out: "Var"):
        if np.ndim(out.value) != 0:
            raise ValueError("backward target must be scalar")
        for n in self.nodes:
            n.grad = None
        out.grad = np.ones_like(out.value)
        for n in reversed(self.nodes):
            if n.grad is not None and n._backward is not None:
                n._backward(n.grad)


def value_of(x):
    return x.value if isinstance(x, Var) else x


def _accum(v: "Var", g):
    g = _unbroadcast(g, np.shape(v.value))
    v.grad = g if v.grad is None else v.grad + g


class Var:
    """An array node on the tape.  Mixed arithmetic with plain ndarrays /
    scalars treats the plain operand as a constant."""

    __slots__ = ("value", "grad", "tape", "_backward")

    # keep numpy from elementwise-broadcasting over Var objects; mixed
    # expressions always dispatch to the Var operators below
    __array_ufunc__ = None

    def __init__(self, value, tape: Tape, backward=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.tape = tape
        self._backward = backward
        tape.nodes.append(self)

    # -- elementwise -------------------------------------------------
    def __add__(self, other):
        ov = value_of(other)
        out = Var(self.value + ov, self.tape)
        if isinstance(other, Var):
            out._backward = lambda g: (_accum(self, g), _accum(other, g))
        else:
            out._backward = lambda g: _accum(self, g)
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Var(-self.value, self.tape)
        out._backward = lambda g: _accum(self, -g)
        return out

    def __sub__(self, other):
        ov = value_of(other)
        out = Var(self.value - ov, self.tape)
        if isinstance(other, Var):
            out._backward = lambda g: (_accum(self, g), _accum(other, -g))
        else:
            out._backward = lambda g: _accum(self, g)
        return out

    def __rsub__(self, other):
        out = Var(other - self.value, self.tape)
        out._backward = lambda g: _accum(self, -g)
        return out

    def __mul__(self, other):
        ov = value_of(other)
        out = Var(self.value * ov, self.tape)
        if isinstance(other, Var):
            out._backward = lambda g: (_accum(self, g * ov), _accum(other, g * self.value))
        else:
            out._backward = lambda g: _accum(self, g * ov)
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a traced variable is not recorded")
        return self * (1.0 / other)

    # -- linear algebra ----------------------------------------------
    def __matmul__(self, other):
        ov = value_of(other)
        out = Var(self.value @ ov, self.tape)
        if isinstance(other, Var):
            out._backward = lambda g: (
                _accum(self, g @ ov.T),
                _accum(other, self.value.T @ g),
            )
        else:
            out._backward = lambda g: _accum(self, g @ ov.T)
        return out

    def __rmatmul__(self, other):
        # constant @ Var
        out = Var(other @ self.value, self.tape)
        out._backward = lambda g: _accum(self, other.T @ g)
        return out

    # -- nonlinearities and reductions -------------------------------
    def tanh(self):
        tv = np.tanh(self.value)
        out = Var(tv, self.tape)
        out._backward = lambda g: _accum(self, g * (1.0 - tv * tv))
        return out

    def sum(self):
        out = Var(self.value.sum(), self.tape)
        out._backward = lambda g: _accum(self, g * np.ones_like(self.value))
        return out

    def mean(self):
        n = self.value.size
        out = Var(self.value.mean(), self.tape)
        out._backward = lambda g: _accum(self, (g / n) * np.ones_like(self.value))
        return out


def tanh(x):
    return x.tanh() if isinstance(x, Var) else np.tanh(x)


def mean(x):
    return x.mean() if isinstance(x, Var) else np.mean(x)


def square(x):
    return x * x


def concat(parts: list, axis: int = 1):
    """Column-concatenate a mix of Vars and constant arrays."""
    tape = next((p.tape for p in parts if isinstance(p, Var)), None)
    vals = [value_of(p) for p in parts]
    joined = np.concatenate(vals, axis=axis)
    if tape is None:
        return joined
    out = Var(joined, tape)
    widths = [v.shape[axis] for v in vals]

    def backward(g):
        ofs = 0
        for p, w in zip(parts, widths):
            if isinstance(p, Var):
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(ofs, ofs + w)
                _accum(p, g[tuple(sl)])
            ofs += w

    out._backward = backward
    return out


def getcol(x, k: int):
    """Column k as an (N, 1) slice."""
    if not isinstance(x, Var):
        return x[:, k : k + 1]
    out = Var(x.value[:, k : k + 1], x.tape)

    def backward(g):
        full = np.zeros_like(x.value)
        full[:, k : k + 1] = g
        _accum(x, full)

    out._backward = backward
    return out


@dataclass
class Jet2:
    """Batched 2nd-order jet: value and the input derivatives the stress
    residual needs.  Components are (N, d) arrays or tape Vars."""

    value: object
    d_dx: object
    d_dt: object
    d2_dx2: object

    def __add__(self, other):
        return Jet2(
            self.value + other.value,
            self.d_dx + other.d_dx,
            self.d_dt + other.d_dt,
            self.d2_dx2 + other.d2_dx2,
        )

    def scale(self, c):
        return Jet2(c * self.value, c * self.d_dx, c * self.d_dt, c * self.d2_dx2)

    def mul(self, other: "Jet2") -> "Jet2":
        """Leibniz product of two jets."""
        return Jet2(
            self.value * other.value,
            self.d_dx * other.value + self.value * other.d_dx,
            self.d_dt * other.value + self.value * other.d_dt,
            self.d2_dx2 * other.value
            + 2.0 * (self.d_dx * other.d_dx)
            + self.value * other.d2_dx2,
        )


def jet_const(value) -> Jet2:
    """Jet of a constant (all derivative components zero)."""
    v = np.asarray(value, dtype=float)
    z = np.zeros_like(v)
    return Jet2(v, z.copy(), z.copy(), z.copy())


def jet_input(value, d_dx, d_dt) -> Jet2:
    """Seeded input jet (second derivative of a coordinate is zero)."""
    v = np.asarray(value, dtype=float)
    return Jet2(
        v,
        np.broadcast_to(np.asarray(d_dx, dtype=float), v.shape).copy(),
        np.broadcast_to(np.asarray(d_dt, dtype=float), v.shape).copy(),
        np.zeros_like(v),
    )


def _t(W: Var) -> "Var":
    """Transpose of a Var matrix (recorded)."""
    out = Var(W.value.T, W.tape)
    out._backward = lambda g: _accum(W, g.T)
    return out


def _const_matmul(c, W: Var) -> "Var":
    """constant (N, in) @ Var(out, in).T"""
    c = np.asarray(c, dtype=float)
    out = Var(c @ W.value.T, W.tape)
    out._backward = lambda g: _accum(W, g.T @ c)
    return out


def jet_affine(jet: Jet2, W, b) -> Jet2:
    """x -> x @ W.T + b applied componentwise (bias affects value only)."""

    def mm(c):
        if isinstance(W, Var):
            return c @ _t(W) if isinstance(c, Var) else _const_matmul(c, W)
        return c @ W.T

    return Jet2(mm(jet.value) + b, mm(jet.d_dx), mm(jet.d_dt), mm(jet.d2_dx2))


def jet_tanh(jet: Jet2) -> Jet2:
    o = tanh(jet.value)
    s = 1.0 - o * o
    return Jet2(
        o,
        s * jet.d_dx,
        s * jet.d_dt,
        s * jet.d2_dx2 - 2.0 * (o * (s * (jet.d_dx * jet.d_dx))),
    )


def mlp_forward_jet(layers, jet_in: Jet2) -> Jet2:
    """Propagate a jet through affine/tanh pairs; the last layer is linear.

    ``layers`` is a list of (W, b) with W shaped (out, in); entries may be
    tape Vars (training) or plain arrays (evaluation).
    """
    jet = jet_in
    for i, (W, b) in enumerate(layers):
        jet = jet_affine(jet, W, b)
        if i < len(layers) - 1:
            jet = jet_tanh(jet)
    return jet


def grad_check(fun, theta: np.ndarray, n_samples=25, step=1e-6, seed=0):
    """Worst relative disagreement between ``fun``'s gradient and central
    differences over a random parameter subset.

    ``fun(theta) -> (loss, grad)``.  The check is its own oracle: a large
    ``step`` reports a large error rather than silently passing.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    rng = np.random.default_rng(seed)
    _, g = fun(theta)
    idx = rng.choice(theta.size, size=min(n_samples, theta.size), replace=False)
    worst = 0.0
    for i in idx:
        e = np.zeros_like(theta)
        e[i] = step
        fp, _ = fun(theta + e)
        fm, _ = fun(theta - e)
        fd = (fp - fm) / (2 * step)
        scale = max(abs(fd), abs(g[i]), 1e-12)
        worst = max(worst, abs(fd - g[i]) / scale)
    return worst
