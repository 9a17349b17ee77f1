"""Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array. Operations executed while a Tape is active are
recorded in execution order (which is a topological order by construction);
Tape.backward replays them in reverse, accumulating gradients into every
tensor that requires them. Tensors are float64 by default so that gradient
checks have headroom; float32 data is accepted and preserved.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

_tls = threading.local()


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


def _active_tape():
    return getattr(_tls, "tape", None)


class Tape:
    """Recording of operations for one forward pass, single-threaded.

    Use as a context manager; backward() may be called once per tape.
    """

    def __init__(self):
        self._ops = []  # (out, backward_fn) in execution order
        self._spent = False

    def __enter__(self):
        if _active_tape() is not None:
            raise RuntimeError("a tape is already active on this thread")
        _tls.tape = self
        return self

    def __exit__(self, *exc):
        _tls.tape = None
        return False

    def record(self, out, backward_fn):
        self._ops.append((out, backward_fn))

    def backward(self, loss):
        """Seed d(loss)/d(loss)=1 and accumulate gradients into all leaves."""
        if self._spent:
            raise RuntimeError("backward was already called on this tape")
        if not isinstance(loss, Tensor) or loss.tape is not self:
            raise ValueError("loss is not recorded on this tape")
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        self._spent = True
        loss.grad = np.ones_like(loss.data)
        for out, backward_fn in reversed(self._ops):
            if out.grad is not None:
                backward_fn(out.grad)


class Tensor:
    """N-dimensional array, optionally recorded on a tape for autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "tape", "name")

    def __init__(self, data, requires_grad=False, name=None):
        if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
            self.data = data
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.tape = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = self.name or ("param" if self.requires_grad else "tensor")
        return f"Tensor({tag}, shape={self.shape})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else np.float64
    return Tensor(np.asarray(x, dtype=dtype))


def _accum(t, g):
    if not (t.requires_grad or t.tape is not None):
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _record(out, parents, backward_fn):
    tape = _active_tape()
    if tape is None:
        return out
    if any(p.requires_grad or p.tape is tape for p in parents):
        out.tape = tape
        tape.record(out, backward_fn)
    return out


def _unbroadcast(g, shape):
    """Sum g down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise binary ops

def add(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = Tensor(a.data + b.data)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _record(out, (a, b), backward)


def sub(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = Tensor(a.data - b.data)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _record(out, (a, b), backward)


def mul(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = Tensor(a.data * b.data)

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _record(out, (a, b), backward)


def div(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    out = Tensor(a.data / b.data)

    def backward(g):
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _record(out, (a, b), backward)


# ---------------------------------------------------------------------------
# contractions

def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _record(out, (a, b), backward)


def einsum(spec, a, b):
    """Two-operand einsum with automatic backward.

    Every index of each operand must appear in the output or in the other
    operand (plain contractions; no diagonals), which makes the gradient a
    pair of einsums with the roles swapped.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    inputs, out_spec = spec.replace(" ", "").split("->")
    sa, sb = inputs.split(",")
    if len(set(sa)) != len(sa) or len(set(sb)) != len(sb):
        raise ShapeError(f"einsum spec {spec!r} repeats an index within an operand")
    for ch in sa:
        if ch not in out_spec and ch not in sb:
            raise ShapeError(f"einsum spec {spec!r}: index {ch!r} unresolvable in backward")
    for ch in sb:
        if ch not in out_spec and ch not in sa:
            raise ShapeError(f"einsum spec {spec!r}: index {ch!r} unresolvable in backward")
    try:
        out = Tensor(np.einsum(spec, a.data, b.data))
    except ValueError as e:
        raise ShapeError(f"einsum {spec!r} on {a.shape}, {b.shape}: {e}") from e

    def backward(g):
        _accum(a, np.einsum(f"{out_spec},{sb}->{sa}", g, b.data))
        _accum(b, np.einsum(f"{sa},{out_spec}->{sb}", a.data, g))

    return _record(out, (a, b), backward)


# ---------------------------------------------------------------------------
# elementwise unary ops

def relu(x):
    x = _as_tensor(x)
    out = Tensor(np.maximum(x.data, 0.0))

    def backward(g):
        _accum(x, g * (x.data > 0))

    return _record(out, (x,), backward)


def gelu(x):
    x = _as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = Tensor(x.data * cdf)

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
        _accum(x, g * (cdf + x.data * pdf))

    return _record(out, (x,), backward)


def sigmoid(x):
    x = _as_tensor(x)
    y = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
                 np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
    out = Tensor(y)

    def backward(g):
        _accum(x, g * y * (1.0 - y))

    return _record(out, (x,), backward)


def exp(x):
    x = _as_tensor(x)
    out = Tensor(np.exp(x.data))

    def backward(g):
        _accum(x, g * out.data)

    return _record(out, (x,), backward)


def log(x):
    x = _as_tensor(x)
    out = Tensor(np.log(x.data))

    def backward(g):
        _accum(x, g / x.data)

    return _record(out, (x,), backward)


def sqrt(x):
    x = _as_tensor(x)
    out = Tensor(np.sqrt(x.data))

    def backward(g):
        _accum(x, g * 0.5 / out.data)

    return _record(out, (x,), backward)


def absolute(x):
    x = _as_tensor(x)
    out = Tensor(np.abs(x.data))

    def backward(g):
        _accum(x, g * np.sign(x.data))

    return _record(out, (x,), backward)


def clamp_max(x, cap):
    """min(x, cap) elementwise; gradient is zero where the cap binds."""
    x = _as_tensor(x)
    out = Tensor(np.minimum(x.data, cap))

    def backward(g):
        _accum(x, g * (x.data < cap))

    return _record(out, (x,), backward)


def softmax(x, axis):
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accum(x, y * (g - dot))

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# reductions

def tsum(x, axis=None, keepdims=False):
    x = _as_tensor(x)
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.shape))

    return _record(out, (x,), backward)


def tmean(x, axis=None, keepdims=False):
    x = _as_tensor(x)
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims))
    n = x.data.size if axis is None else x.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.shape) / n)

    return _record(out, (x,), backward)


def tmax(x):
    """Global max; on ties the gradient is split evenly across the ties
    (exact ties do occur: symmetric distance matrices tie pairwise)."""
    x = _as_tensor(x)
    m = x.data.max()
    out = Tensor(np.asarray(m, dtype=x.data.dtype))

    def backward(g):
        mask = x.data == m
        _accum(x, g * mask / mask.sum())

    return _record(out, (x,), backward)


def tmin(x):
    x = _as_tensor(x)
    m = x.data.min()
    out = Tensor(np.asarray(m, dtype=x.data.dtype))

    def backward(g):
        mask = x.data == m
        _accum(x, g * mask / mask.sum())

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# shape ops

def reshape(x, shape):
    x = _as_tensor(x)
    out = Tensor(x.data.reshape(shape))

    def backward(g):
        _accum(x, g.reshape(x.shape))

    return _record(out, (x,), backward)


def transpose(x, axes):
    x = _as_tensor(x)
    out = Tensor(np.transpose(x.data, axes))
    inv = np.argsort(axes)

    def backward(g):
        _accum(x, np.transpose(g, inv))

    return _record(out, (x,), backward)


def concat(tensors, axis):
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _record(out, tuple(tensors), backward)


def narrow(x, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    x = _as_tensor(x)
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    out = Tensor(x.data[sl])

    def backward(g):
        full = np.zeros_like(x.data)
        full[sl] = g
        _accum(x, full)

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# structured ops

def conv1d(x, w, b, dilation=1):
    """Temporal convolution with 'same' padding.

    x: (C_in, T); w: (C_out, C_in, k) with odd k; b: (C_out,) or None.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    cin, t = x.shape
    cout, cin_w, k = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv1d channels: input {cin} vs kernel {cin_w}")
    if k % 2 == 0:
        raise ShapeError("conv1d requires an odd kernel size")
    pad = dilation * (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad)))
    win = np.stack([xp[:, j * dilation:j * dilation + t] for j in range(k)], axis=-1)
    y = np.einsum("oik,itk->ot", w.data, win)
    parents = [x, w]
    if b is not None:
        b = _as_tensor(b)
        y = y + b.data[:, None]
        parents.append(b)
    out = Tensor(y)

    def backward(g):
        _accum(w, np.einsum("ot,itk->oik", g, win))
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, j * dilation:j * dilation + t] += np.einsum("ot,oi->it", g, w.data[:, :, j])
        _accum(x, gxp[:, pad:pad + t] if pad else gxp)
        if b is not None:
            _accum(b, g.sum(axis=1))

    return _record(out, tuple(parents), backward)


def batchnorm(x, gamma, beta, running_mean, running_var, train, momentum=0.1, eps=1e-5):
    """Normalize over all non-channel axes (channel axis 0).

    In train mode batch statistics are used and the running buffers (plain
    arrays, mutated in place) are updated; in eval mode the running
    statistics give a fixed affine map.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    axes = tuple(range(1, x.ndim))
    bshape = (-1,) + (1,) * (x.ndim - 1)
    n = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    if train:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean += momentum * (mean - running_mean)
        running_var += momentum * (var - running_var)
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean.reshape(bshape)) * inv_std.reshape(bshape)
    out = Tensor(gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape))

    def backward(g):
        _accum(beta, g.sum(axis=axes))
        _accum(gamma, (g * xhat).sum(axis=axes))
        gxh = g * gamma.data.reshape(bshape)
        if train:
            m1 = gxh.mean(axis=axes).reshape(bshape)
            m2 = (gxh * xhat).mean(axis=axes).reshape(bshape)
            _accum(x, inv_std.reshape(bshape) * (gxh - m1 - xhat * m2))
        else:
            _accum(x, gxh * inv_std.reshape(bshape))

    return _record(out, (x, gamma, beta), backward)


def dropout(x, rate, rng, train):
    """Inverted dropout; identity when not training or rate is zero."""
    x = _as_tensor(x)
    if not train or rate <= 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * mask)

    def backward(g):
        _accum(x, g * mask)

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# op registry and oracles

OP_KINDS = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "matmul": matmul,
    "einsum": einsum,
    "relu": relu,
    "gelu": gelu,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "abs": absolute,
    "clamp_max": clamp_max,
    "softmax": softmax,
    "sum": tsum,
    "mean": tmean,
    "max": tmax,
    "min": tmin,
    "reshape": reshape,
    "transpose": transpose,
    "concat": concat,
    "narrow": narrow,
    "conv1d": conv1d,
    "batchnorm": batchnorm,
    "dropout": dropout,
}


def forward_op(kind, *inputs, **kwargs):
    """Dispatch an operation by name; inputs recorded on the active tape."""
    try:
        fn = OP_KINDS[kind]
    except KeyError:
        raise KeyError(f"unknown op kind {kind!r}") from None
    return fn(*inputs, **kwargs)


def finite_diff_check(f, x, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    f maps a Tensor to a scalar Tensor and must be deterministic. The error
    for each element is |analytic - fd| / max(1, |analytic|).
    """
    # order="C" so the flat probe view below aliases base; with order="K"
    # a transposed input keeps Fortran layout and reshape(-1) would copy,
    # leaving every probe invisible to f.
    base = np.array(x.data if isinstance(x, Tensor) else x,
                    dtype=np.float64, order="C")
    leaf = Tensor(base, requires_grad=True)
    with Tape() as tape:
        out = f(leaf)
        tape.backward(out)
    analytic = (leaf.grad if leaf.grad is not None else np.zeros_like(base)).reshape(-1)

    flat = base.reshape(-1)
    assert flat.base is base
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(Tensor(base)).item()
        flat[i] = orig - eps
        fm = f(Tensor(base)).item()
        flat[i] = orig
        fd = (fp - fm) / (2.0 * eps)
        err = abs(analytic[i] - fd) / max(1.0, abs(analytic[i]))
        worst = max(worst, err)
    return worst
