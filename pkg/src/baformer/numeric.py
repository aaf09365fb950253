"""Dense float64 kernels with reverse-mode gradients.

A :class:`Tensor` wraps a 2-D ``float64`` array and records the closure that
pushes its gradient back to its parents.  Calling :meth:`Tensor.backward` on a
scalar walks the recorded graph in reverse topological order.

The module also carries the finite-difference harness used to verify those
gradients and a functional Adam step with a step learning-rate schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ShapeError

LN_EPS = 1e-5


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeError("as_matrix", f"expected rank <= 2, got {a.shape}")
    return a


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, data, parents=(), backward_fn=None, requires_grad=False):
        self.data = as_matrix(data)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self):
        return transpose(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), scale(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return hadamard(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ShapeError("backward", f"needs a scalar, got {self.data.shape}")
        order = _topological(self)
        for node in order:
            if not isinstance(node, Parameter):
                node.grad = None
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node.backward_fn is not None and node.grad is not None:
                node.backward_fn(node.grad)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])


class Parameter(Tensor):
    """A trainable leaf.  ``grad`` accumulates until :meth:`zero_grad`."""

    __slots__ = ("name",)

    def __init__(self, value, name: str):
        super().__init__(value, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    @property
    def value(self):
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _node(data, parents, backward_fn):
    parents = tuple(parents)
    if not any(p.requires_grad for p in parents):
        return Tensor(data)
    return Tensor(data, parents, backward_fn)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(kind, a, b):
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ShapeError(kind, f"{a.shape} vs {b.shape}")


# ---------------------------------------------------------------- primitives


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("add", a.data, b.data)
    out = a.data + b.data

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(out, (a, b), back)


def hadamard(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("hadamard", a.data, b.data)
    out = a.data * b.data

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), back)


def scale(a, c: float):
    def back(g):
        a._accumulate(g * c)

    return _node(a.data * c, (a,), back)


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError("matmul", f"{a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def back(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _node(out, (a, b), back)


def transpose(a):
    a = _wrap(a)

    def back(g):
        a._accumulate(g.T)

    return _node(a.data.T.copy(), (a,), back)


def row_softmax(a):
    a = _wrap(a)
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def back(g):
        a._accumulate(out * (g - (g * out).sum(axis=1, keepdims=True)))

    return _node(out, (a,), back)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = _wrap(a)
    out = _sigmoid(a.data)

    def back(g):
        a._accumulate(g * out * (1.0 - out))

    return _node(out, (a,), back)


def relu(a):
    a = _wrap(a)
    mask = a.data > 0

    def back(g):
        a._accumulate(g * mask)

    return _node(a.data * mask, (a,), back)


def layer_norm(a, eps: float = LN_EPS):
    """Normalise each row to zero mean and unit variance (no affine part)."""
    a = _wrap(a)
    x = a.data
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + eps)
    out = xc * inv

    def back(g):
        n = x.shape[1]
        gx = inv * (g - g.mean(axis=1, keepdims=True) - out * (g * out).sum(axis=1, keepdims=True) / n)
        a._accumulate(gx)

    return _node(out, (a,), back)


# ------------------------------------------------------- structural helpers


def log(a):
    a = _wrap(a)

    def back(g):
        a._accumulate(g / a.data)

    return _node(np.log(a.data), (a,), back)


def clip(a, lo: float, hi: float):
    a = _wrap(a)
    inside = (a.data >= lo) & (a.data <= hi)

    def back(g):
        a._accumulate(g * inside)

    return _node(np.clip(a.data, lo, hi), (a,), back)


def power(a, p: float):
    """Elementwise ``a**p`` for nonnegative ``a``."""
    a = _wrap(a)
    out = a.data ** p

    def back(g):
        a._accumulate(g * p * a.data ** (p - 1.0))

    return _node(out, (a,), back)


def total(a):
    a = _wrap(a)

    def back(g):
        a._accumulate(np.full_like(a.data, g.reshape(-1)[0]))

    return _node(a.data.sum().reshape(1, 1), (a,), back)


def row_sums(a):
    a = _wrap(a)

    def back(g):
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return _node(a.data.sum(axis=1, keepdims=True), (a,), back)


def rows(a, index):
    """Gather rows by integer index (duplicates allowed)."""
    a = _wrap(a)
    index = np.asarray(index, dtype=np.int64)

    def back(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, index, g)
        a._accumulate(buf)

    return _node(a.data[index], (a,), back)


def pick(a, row_idx, col_idx):
    """Gather single entries ``a[row_idx[k], col_idx[k]]`` into a column."""
    a = _wrap(a)
    row_idx = np.asarray(row_idx, dtype=np.int64)
    col_idx = np.asarray(col_idx, dtype=np.int64)

    def back(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, (row_idx, col_idx), g[:, 0])
        a._accumulate(buf)

    return _node(a.data[row_idx, col_idx].reshape(-1, 1), (a,), back)


def cols(a, start: int, stop: int):
    a = _wrap(a)

    def back(g):
        buf = np.zeros_like(a.data)
        buf[:, start:stop] = g
        a._accumulate(buf)

    return _node(a.data[:, start:stop].copy(), (a,), back)


def hconcat(parts):
    parts = [_wrap(p) for p in parts]
    widths = np.cumsum([0] + [p.data.shape[1] for p in parts])
    if len({p.data.shape[0] for p in parts}) != 1:
        raise ShapeError("hconcat", str([p.data.shape for p in parts]))

    def back(g):
        for p, lo, hi in zip(parts, widths[:-1], widths[1:]):
            if p.requires_grad:
                p._accumulate(g[:, lo:hi])

    return _node(np.hstack([p.data for p in parts]), parts, back)


def vconcat(parts):
    parts = [_wrap(p) for p in parts]
    heights = np.cumsum([0] + [p.data.shape[0] for p in parts])
    if len({p.data.shape[1] for p in parts}) != 1:
        raise ShapeError("vconcat", str([p.data.shape for p in parts]))

    def back(g):
        for p, lo, hi in zip(parts, heights[:-1], heights[1:]):
            if p.requires_grad:
                p._accumulate(g[lo:hi])

    return _node(np.vstack([p.data for p in parts]), parts, back)


def temporal_stack(a, dilation: int):
    """Concatenate ``[x[t-d], x[t], x[t+d]]`` per row, zero padded; T x 3C."""
    a = _wrap(a)
    x = a.data
    T, C = x.shape
    d = int(dilation)
    out = np.zeros((T, 3 * C))
    if d < T:
        out[d:, :C] = x[:-d]
        out[:-d, 2 * C:] = x[d:]
    out[:, C:2 * C] = x

    def back(g):
        gx = g[:, C:2 * C].copy()
        if d < T:
            gx[:-d] += g[d:, :C]
            gx[d:] += g[:-d, 2 * C:]
        a._accumulate(gx)

    return _node(out, (a,), back)


# ------------------------------------------------------- forward dispatcher

_ARITY = {
    "matmul": 2,
    "row_softmax": 1,
    "sigmoid": 1,
    "relu": 1,
    "layer_norm": 1,
    "transpose": 1,
    "hadamard": 2,
    "add": 2,
}

_FORWARD = {
    "matmul": matmul,
    "row_softmax": row_softmax,
    "sigmoid": sigmoid,
    "relu": relu,
    "layer_norm": layer_norm,
    "transpose": transpose,
    "hadamard": hadamard,
    "add": add,
}


def primitive_forward(kind: str, inputs) -> np.ndarray:
    """Evaluate one primitive on plain matrices and return the result."""
    if kind not in _FORWARD:
        raise ValueError(f"unknown primitive {kind!r}")
    if len(inputs) != _ARITY[kind]:
        raise ShapeError(kind, f"expected {_ARITY[kind]} inputs, got {len(inputs)}")
    mats = [as_matrix(x) for x in inputs]
    if kind in ("add", "hadamard") and mats[0].shape != mats[1].shape:
        raise ShapeError(kind, f"{mats[0].shape} vs {mats[1].shape}")
    return _FORWARD[kind](*[Tensor(m) for m in mats]).data


# ------------------------------------------------------ gradient checking


def finite_diff_check(loss_fn, params, eps: float = 1e-5, max_entries: int | None = 8, seed: int = 0) -> float:
    """Largest relative gap between backprop and central differences.

    ``loss_fn()`` must rebuild the scalar loss from the current values of
    ``params``.  At most ``max_entries`` entries per parameter are probed
    (all of them when ``None``).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise NonFiniteError("loss is not finite at the evaluation point")
    loss.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        n = flat.size
        idx = np.arange(n) if max_entries is None or n <= max_entries else rng.choice(n, max_entries, replace=False)
        for k in idx:
            orig = flat[k]
            flat[k] = orig + eps
            up = loss_fn().item()
            flat[k] = orig - eps
            down = loss_fn().item()
            flat[k] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteError(f"loss not finite while probing {p.name}")
            fd = (up - down) / (2 * eps)
            a = analytic.reshape(-1)[k]
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            worst = max(worst, err)
    return worst


# ------------------------------------------------------------------- Adam


@dataclass
class OptimState:
    lr: float
    decay: float = 0.5
    decay_interval: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    epoch: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def current_lr(self) -> float:
        return self.lr * self.decay ** (self.epoch // self.decay_interval)


def adam_step(params, grads, state: OptimState):
    """One Adam update; returns ``(new_values, new_state)``.

    ``params`` maps names to arrays, ``grads`` holds matching arrays.  Nothing
    is mutated, so a non-finite gradient leaves the caller's values intact.
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for {name}")
        if g.shape != params[name].shape:
            raise ShapeError("adam_step", f"{name}: grad {g.shape} vs value {params[name].shape}")
    t = state.step + 1
    lr = state.current_lr()
    b1, b2 = state.beta1, state.beta2
    new_vals, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = grads[name]
        m = b1 * state.m.get(name, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_vals[name] = value - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v
    new_state = OptimState(
        lr=state.lr, decay=state.decay, decay_interval=state.decay_interval,
        beta1=b1, beta2=b2, eps=state.eps, step=t, epoch=state.epoch, m=new_m, v=new_v,
    )
    return new_vals, new_state
