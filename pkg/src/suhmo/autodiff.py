"""Minimal reverse-mode autodiff over dense numpy arrays (rank <= 3).

Nodes are ``Tensor`` objects. Each primitive computes its value eagerly and
records a closure that pushes the upstream gradient into its parents. The
set of primitives is small on purpose: it covers the recurrent and attention
networks used by the generator and the discriminators, plus their losses.
"""
import numpy as np

from . import kernels


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "_grad", "parents", "_backward", "op", "requires_grad")

    def __init__(self, value, parents=(), op="leaf", requires_grad=False):
        self.value = value if isinstance(value, np.ndarray) else np.asarray(value, dtype=np.float64)
        self._grad = None
        self.parents = parents
        self._backward = None
        self.op = op
        self.requires_grad = requires_grad

    @property
    def grad(self):
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    def zero_grad(self):
        self._grad = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)


def constant(value, dtype=None):
    arr = np.asarray(value, dtype=dtype if dtype is not None else np.float64)
    return Tensor(arr)


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dt = like.dtype if like is not None else np.float64
    return Tensor(np.asarray(x, dtype=dt))


def _acc(node, delta):
    if not node.requires_grad:
        return
    if node._grad is None:
        node._grad = np.array(delta, dtype=node.value.dtype, copy=True).reshape(node.value.shape)
    else:
        node._grad += delta


def _node(value, parents, op, backward):
    req = any(p.requires_grad for p in parents)
    out = Tensor(value, parents if req else (), op, req)
    if req:
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(kind, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}") from None


# -- elementwise arithmetic ------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None)
    _check_broadcast("add", a, b)

    def backward(g):
        _acc(a, _unbroadcast(g, a.shape))
        _acc(b, _unbroadcast(g, b.shape))

    return _node(a.value + b.value, (a, b), "add", backward)


def sub(a, b):
    a, b = _as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None)
    _check_broadcast("sub", a, b)

    def backward(g):
        _acc(a, _unbroadcast(g, a.shape))
        _acc(b, -_unbroadcast(g, b.shape))

    return _node(a.value - b.value, (a, b), "sub", backward)


def mul(a, b):
    a, b = _as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None)
    _check_broadcast("mul", a, b)

    def backward(g):
        _acc(a, _unbroadcast(g * b.value, a.shape))
        _acc(b, _unbroadcast(g * a.value, b.shape))

    return _node(a.value * b.value, (a, b), "mul", backward)


def scale(a, c):
    """Multiply by a python scalar."""

    def backward(g):
        _acc(a, g * c)

    return _node(a.value * a.value.dtype.type(c), (a,), "scale", backward)


def maximum(a, b):
    """Elementwise max; on ties the gradient goes to ``a``."""
    a, b = _as_tensor(a, b if isinstance(b, Tensor) else None), _as_tensor(b, a if isinstance(a, Tensor) else None)
    _check_broadcast("maximum", a, b)
    first = a.value >= b.value

    def backward(g):
        _acc(a, _unbroadcast(np.where(first, g, 0), a.shape))
        _acc(b, _unbroadcast(np.where(first, 0, g), b.shape))

    return _node(np.where(first, a.value, b.value), (a, b), "maximum", backward)


def relu(a):
    return maximum(a, np.zeros((), dtype=a.dtype))


def tanh(a):
    y = np.tanh(a.value)

    def backward(g):
        _acc(a, g * (1.0 - y * y))

    return _node(y, (a,), "tanh", backward)


def sigmoid(a):
    y = kernels._pykernels._sigmoid(a.value)

    def backward(g):
        _acc(a, g * y * (1.0 - y))

    return _node(y, (a,), "sigmoid", backward)


def square(a):
    return mul(a, a)


# -- reductions ------------------------------------------------------------


def sum_(a, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.shape))

    return _node(np.asarray(a.value.sum(axis=axis, keepdims=keepdims)), (a,), "sum", backward)


def mean(a, axis=None, keepdims=False):
    n = a.value.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g / n, a.shape))

    return _node(np.asarray(a.value.mean(axis=axis, keepdims=keepdims)), (a,), "mean", backward)


def softmax(a, axis=-1):
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _acc(a, y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _node(y, (a,), "softmax", backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize over the last axis, then scale and shift."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer-norm: input {x.shape} with gain {gamma.shape} and bias {beta.shape}")
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        _acc(gamma, (g * xhat).sum(axis=lead))
        _acc(beta, g.sum(axis=lead))
        if x.requires_grad:
            dxh = g * gamma.value
            dx = inv * (dxh - dxh.mean(axis=-1, keepdims=True) - xhat * (dxh * xhat).mean(axis=-1, keepdims=True))
            _acc(x, dx)

    return _node(xhat * gamma.value + beta.value, (x, gamma, beta), "layer-norm", backward)


# -- linear algebra and shape manipulation ---------------------------------


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    na, nb = a.value.ndim, b.value.ndim
    ok = nb >= 2 and na >= 2 and a.shape[-1] == b.shape[-2] and (nb == 2 or (na == nb and a.shape[0] == b.shape[0]))
    if not ok:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        if a.requires_grad:
            _acc(a, g @ np.swapaxes(b.value, -1, -2))
        if b.requires_grad:
            if nb == 2 and na == 3:
                _acc(b, a.value.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
            else:
                _acc(b, np.swapaxes(a.value, -1, -2) @ g)

    return _node(a.value @ b.value, (a, b), "matmul", backward)


def transpose(a, axes=None):
    inv = None if axes is None else np.argsort(axes)

    def backward(g):
        _acc(a, np.transpose(g, inv))

    return _node(np.transpose(a.value, axes), (a,), "transpose", backward)


def reshape(a, shape):
    def backward(g):
        _acc(a, g.reshape(a.shape))

    return _node(a.value.reshape(shape), (a,), "reshape", backward)


def slice_(a, idx):
    basic = all(isinstance(i, (int, slice, type(None), type(Ellipsis))) for i in (idx if isinstance(idx, tuple) else (idx,)))

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.value)
            if basic:
                full[idx] = g
            else:
                np.add.at(full, idx, g)
            _acc(a, full)

    try:
        val = a.value[idx]
    except IndexError as e:
        raise ShapeError(f"slice: index {idx!r} invalid for shape {a.shape}") from e
    return _node(np.array(val, copy=True), (a,), "slice", backward)


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        val = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]} on axis {axis}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, sizes, axis=axis)):
            _acc(t, part)

    return _node(val, tuple(tensors), "concat", backward)


def stack(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        val = np.stack([t.value for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"stack: incompatible shapes {[t.shape for t in tensors]}") from None

    def backward(g):
        parts = np.moveaxis(g, axis, 0)
        for t, part in zip(tensors, parts):
            _acc(t, part)

    return _node(val, tuple(tensors), "stack", backward)


# -- fused recurrent ops ---------------------------------------------------


def lstm_seq(x, w, b, h0=None, c0=None):
    """Run an LSTM over ``x`` (B, T, I); returns all hidden states (B, T, H).

    ``w`` is (I + H, 4H) with input rows first, ``b`` is (4H,). Gate order
    is (input, forget, candidate, output).
    """
    B, T, I = x.shape
    H = w.shape[1] // 4
    if w.shape != (I + H, 4 * H) or b.shape != (4 * H,):
        raise ShapeError(f"lstm: input {x.shape}, weights {w.shape}, bias {b.shape}")
    dt = x.value.dtype
    h0v = np.zeros((B, H), dt) if h0 is None else h0.value
    c0v = np.zeros((B, H), dt) if c0 is None else c0.value
    wx, wh = w.value[:I], w.value[I:]
    xz = (x.value.reshape(B * T, I) @ wx + b.value).reshape(B, T, 4 * H).transpose(1, 0, 2)
    hs, cs, acts, tcs = kernels.lstm_seq_forward(xz, wh, h0v, c0v)

    def backward(g):
        dhs = np.ascontiguousarray(np.swapaxes(g, 0, 1))
        dz, dh0, dc0 = kernels.lstm_seq_backward(dhs, np.zeros((B, H), dt), wh, acts, cs, tcs, c0v)
        dz_flat = dz.reshape(T * B, 4 * H)
        if w.requires_grad:
            hprev = np.concatenate([h0v[None], hs[:-1]], axis=0).reshape(T * B, H)
            xt = np.swapaxes(x.value, 0, 1).reshape(T * B, I)
            _acc(w, np.concatenate([xt.T @ dz_flat, hprev.T @ dz_flat], axis=0))
        _acc(b, dz_flat.sum(axis=0))
        if x.requires_grad:
            _acc(x, np.swapaxes((dz_flat @ wx.T).reshape(T, B, I), 0, 1))
        if h0 is not None:
            _acc(h0, dh0)
        if c0 is not None:
            _acc(c0, dc0)

    parents = (x, w, b) + tuple(t for t in (h0, c0) if t is not None)
    return _node(np.ascontiguousarray(np.swapaxes(hs, 0, 1)), parents, "lstm", backward)


def lstm_cell(x, h, c, w, b):
    """One LSTM step. Returns (B, 2H): new hidden state then new cell state."""
    B, I = x.shape
    H = h.shape[1]
    if w.shape != (I + H, 4 * H) or b.shape != (4 * H,) or c.shape != h.shape or h.shape[0] != B:
        raise ShapeError(f"lstm-cell: input {x.shape}, state {h.shape}/{c.shape}, weights {w.shape}, bias {b.shape}")
    wx, wh = w.value[:I], w.value[I:]
    xz = (x.value @ wx + b.value)[None]
    hs, cs, acts, tcs = kernels.lstm_seq_forward(xz, wh, h.value, c.value)

    def backward(g):
        dhs = np.ascontiguousarray(g[None, :, :H])
        dz, dh0, dc0 = kernels.lstm_seq_backward(dhs, g[:, H:], wh, acts, cs, tcs, c.value)
        dz = dz[0]
        if w.requires_grad:
            _acc(w, np.concatenate([x.value.T @ dz, h.value.T @ dz], axis=0))
        _acc(b, dz.sum(axis=0))
        _acc(x, dz @ wx.T)
        _acc(h, dh0)
        _acc(c, dc0)

    return _node(np.concatenate([hs[0], cs[0]], axis=1), (x, h, c, w, b), "lstm-cell", backward)


PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "concat": lambda *ts, axis=-1: concat(ts, axis=axis),
    "stack": lambda *ts, axis=0: stack(ts, axis=axis),
    "slice": slice_,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softmax": softmax,
    "mean": mean,
    "sum": sum_,
    "elementwise-max": maximum,
    "layer-norm": layer_norm,
    "reshape": reshape,
    "transpose": transpose,
    "lstm": lstm_seq,
    "lstm-cell": lstm_cell,
}


def apply_primitive(kind, *operands, **kwargs):
    try:
        fn = PRIMITIVES[kind]
    except KeyError:
        raise ValueError(f"unknown primitive {kind!r}; known: {sorted(PRIMITIVES)}") from None
    return fn(*operands, **kwargs)


# -- graph traversal -------------------------------------------------------


def _topo(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss, leaves=None):
    """Accumulate d(loss)/d(node) into every node; return grads for ``leaves``.

    ``leaves`` maps names to leaf tensors (as returned by ``ParamSet.bind``).
    Leaves that do not take part in the graph get zero gradients.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss.requires_grad:
        loss._grad = np.ones_like(loss.value)
        for node in reversed(_topo(loss)):
            if node._backward is not None and node._grad is not None:
                node._backward(node._grad)
    if leaves is None:
        return None
    return {name: leaf.grad for name, leaf in leaves.items()}


def zero_grads(loss):
    """Clear accumulated gradients on every node reachable from ``loss``."""
    for node in _topo(loss):
        node.zero_grad()


class ParamSet:
    """Named trainable arrays; iteration is in lexicographic name order."""

    def __init__(self, arrays=None, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._arrays = {}
        for name, arr in (arrays or {}).items():
            self[name] = arr

    def __setitem__(self, name, arr):
        self._arrays[name] = np.array(arr, dtype=self.dtype, copy=True)

    def __getitem__(self, name):
        return self._arrays[name]

    def __contains__(self, name):
        return name in self._arrays

    def __len__(self):
        return len(self._arrays)

    def names(self):
        return sorted(self._arrays)

    def items(self):
        return [(n, self._arrays[n]) for n in self.names()]

    def add(self, name, arr):
        if name in self._arrays:
            raise KeyError(f"duplicate parameter name {name!r}")
        self[name] = arr

    def bind(self, requires_grad=True, prefix=None):
        """Wrap every array as a leaf tensor for one forward/backward pass."""
        return {
            n: Tensor(a, (), "leaf", requires_grad)
            for n, a in self.items()
            if prefix is None or n.startswith(prefix)
        }

    def copy(self):
        return ParamSet(dict(self._arrays), dtype=self.dtype)

    def astype(self, dtype):
        return ParamSet(dict(self._arrays), dtype=dtype)

    def subset(self, prefix):
        return ParamSet({n: a for n, a in self._arrays.items() if n.startswith(prefix)}, dtype=self.dtype)

    def update(self, other):
        for n, a in other.items():
            self[n] = a

    def n_values(self):
        return sum(a.size for a in self._arrays.values())

    def equal(self, other):
        return self.names() == other.names() and all(np.array_equal(self[n], other[n]) for n in self.names())


def grad_check(f, params, eps=1e-5, max_entries=None, seed=0, floor=None, refine=2, tol=1e-4):
    """Max relative error between backprop and central differences.

    ``f`` maps a dict of bound leaves to a scalar tensor. Errors are
    |analytic - numeric| / max(|analytic|, |numeric|, floor), maximised over
    the checked entries. The default floor is the smallest gradient whose
    relative error can be resolved to 1e-4 given the rounding noise of the
    difference quotient. Evaluating a deep graph costs a few ulps of |f|,
    so the noise is taken as 10 * |f| * machine-eps / step and the floor is
    1e4 times that (at least 1e-8).
    An entry whose error exceeds ``tol`` is re-probed with steps eps/10,
    eps/100, ... (``refine`` times) and keeps its smallest error: a ReLU or
    hinge kink closer than eps to the probe point corrupts the difference
    quotient, while a wrong analytic gradient stays wrong at every step.
    With ``max_entries`` only that many entries, drawn uniformly over all
    leaves, are probed.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    work = params.astype(np.float64)
    leaves = work.bind()
    loss = f(leaves)
    analytic = backward(loss, leaves)
    scale = max(1.0, abs(float(loss.value))) * np.finfo(np.float64).eps

    def floor_for(step):
        return floor if floor is not None else max(1e-8, 1e5 * scale / step)

    entries = [(name, i) for name, arr in work.items() for i in range(arr.size)]
    if max_entries is not None and len(entries) > max_entries:
        pick = np.random.default_rng(seed).choice(len(entries), size=max_entries, replace=False)
        entries = [entries[k] for k in sorted(pick)]
    worst = 0.0
    for name, i in entries:
        flat = work[name].reshape(-1)
        orig = flat[i]
        ana = float(analytic[name].reshape(-1)[i])
        best = np.inf
        for k in range(refine + 1):
            step = eps / 10**k
            flat[i] = orig + step
            fp = float(f(work.bind(requires_grad=False)).value.sum())
            flat[i] = orig - step
            fm = float(f(work.bind(requires_grad=False)).value.sum())
            flat[i] = orig
            num = (fp - fm) / (2 * step)
            best = min(best, abs(ana - num) / max(abs(ana), abs(num), floor_for(step)))
            if best <= tol:
                break
        worst = max(worst, best)
    return worst
