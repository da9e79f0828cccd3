"""Dense tensors on a reverse-mode gradient tape.

Every differentiable operation is a registered primitive: a forward function
over numpy arrays that returns its output together with a vector-Jacobian
product closure. ``backward`` walks the recorded graph in reverse topological
order and accumulates gradients into leaf tensors.

Layout convention: images are (N, C, H, W) row-major. Token maps inside the
network are (N, H, W, C) and are transposed around the convolution primitives.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DetachedTensor, DtypeMismatch, InvalidAttr, NotScalar, ShapeMismatch

DTYPES = (np.dtype(np.float32), np.dtype(np.float64))
DEFAULT_DTYPE = np.float32

_PRIMITIVES: dict[str, Callable] = {}
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Node:
    __slots__ = ("op", "parents", "vjp")

    def __init__(self, op: str, parents: tuple, vjp: Callable):
        self.op = op
        self.parents = parents
        self.vjp = vjp


class Tensor:
    """A float32/float64 array that may participate in the gradient tape."""

    __slots__ = ("data", "grad", "requires_grad", "node", "name", "__weakref__")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is not None:
            arr = np.asarray(data, dtype=dtype)
        else:
            arr = np.asarray(data)
            if arr.dtype not in DTYPES:
                arr = arr.astype(DEFAULT_DTYPE)
        if arr.dtype not in DTYPES:
            raise DtypeMismatch(f"unsupported dtype {arr.dtype}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node: Node | None = None
        self.name = name

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def on_tape(self) -> bool:
        return self.node is not None or self.requires_grad

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def __len__(self) -> int:
        return self.shape[0]

    # -- operator sugar -----------------------------------------------------
    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other):
        return add(self, self._lift(other))

    def __radd__(self, other):
        return add(self._lift(other), self)

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return elementwise_scale(self, float(other))
        return mul(self, self._lift(other))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return elementwise_scale(self, float(other))
        return mul(self._lift(other), self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return elementwise_scale(self, 1.0 / float(other))
        return div(self, self._lift(other))

    def __rtruediv__(self, other):
        return div(self._lift(other), self)

    def __neg__(self):
        return elementwise_scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, self._lift(other))

    def __getitem__(self, key):
        return slice_(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None, keepdims=False):
        return max_(self, axis=axis, keepdims=keepdims)


def parameter(data, dtype=None, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype, name=name)


# ---------------------------------------------------------------------------
# primitive registry
# ---------------------------------------------------------------------------

def primitive(name: str):
    def register(fn):
        _PRIMITIVES[name] = fn
        return fn
    return register


def primitive_kinds() -> list[str]:
    return sorted(_PRIMITIVES)


def apply_primitive(op: str, *inputs: Tensor | None, **attrs) -> Tensor:
    """Run primitive ``op`` on ``inputs`` and record it on the tape.

    ``None`` inputs stand for absent optional operands (e.g. a missing bias)
    and receive no gradient.
    """
    try:
        fn = _PRIMITIVES[op]
    except KeyError:
        raise InvalidAttr(f"unknown primitive {op!r}") from None
    dtype = None
    for t in inputs:
        if t is None:
            continue
        if not isinstance(t, Tensor):
            raise TypeError(f"{op}: expected Tensor inputs, got {type(t).__name__}")
        if dtype is None:
            dtype = t.dtype
        elif t.dtype != dtype:
            raise DtypeMismatch(f"{op}: mixed dtypes {dtype} and {t.dtype}")
    arrays = [None if t is None else t.data for t in inputs]
    out, vjp = fn(*arrays, **attrs)
    result = Tensor(out)
    if _grad_enabled and any(t is not None and t.on_tape for t in inputs):
        result.node = Node(op, tuple(inputs), vjp)
    return result


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(op: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

@primitive("add")
def _add(a, b):
    _check_broadcast("add", a, b)
    return a + b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))


@primitive("sub")
def _sub(a, b):
    _check_broadcast("sub", a, b)
    return a - b, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))


@primitive("mul")
def _mul(a, b):
    _check_broadcast("mul", a, b)
    return a * b, lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))


@primitive("div")
def _div(a, b):
    _check_broadcast("div", a, b)
    out = a / b

    def vjp(g):
        ga = g / b
        return _unbroadcast(ga, a.shape), _unbroadcast(-ga * out, b.shape)
    return out, vjp


@primitive("elementwise_scale")
def _scale(a, scale: float = 1.0):
    s = a.dtype.type(scale)
    return a * s, lambda g: (g * s,)


@primitive("matmul")
def _matmul(a, b):
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a, b)
    except ValueError:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}") from None

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b, -1, -2))
        gb = np.matmul(np.swapaxes(a, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return out, vjp


@primitive("linear")
def _linear(x, w, b=None):
    """x (..., in) @ w (in, out) + b (out)."""
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeMismatch(f"linear: input {x.shape} vs weight {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeMismatch(f"linear: bias {b.shape} vs weight {w.shape}")
    x2 = x.reshape(-1, w.shape[0])
    out = x2 @ w
    if b is not None:
        out += b
    out = out.reshape(x.shape[:-1] + (w.shape[1],))

    def vjp(g):
        g2 = g.reshape(-1, w.shape[1])
        gx = (g2 @ w.T).reshape(x.shape)
        gw = x2.T @ g2
        gb = g2.sum(axis=0) if b is not None else None
        return gx, gw, gb
    return out, vjp


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


@primitive("conv2d")
def _conv2d(x, w, b=None, stride=1, pad=0):
    """Dense convolution, x (N, C, H, W), w (O, C, kh, kw), via im2col + matmul."""
    sh, sw = _pair(stride)
    ph, pw = _pair(pad)
    if sh < 1 or sw < 1:
        raise InvalidAttr(f"conv2d: stride must be >= 1, got {stride}")
    if ph < 0 or pw < 0:
        raise InvalidAttr(f"conv2d: pad must be >= 0, got {pad}")
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv2d: input {x.shape} vs kernel {w.shape}")
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    if b is not None and b.shape != (o,):
        raise ShapeMismatch(f"conv2d: bias {b.shape} for {o} output channels")
    hp, wp = h + 2 * ph, wd + 2 * pw
    if hp < kh or wp < kw:
        raise ShapeMismatch(f"conv2d: kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw][:, :, :ho, :wo]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    wmat = w.reshape(o, -1)
    out = cols @ wmat.T
    if b is not None:
        out += b
    out = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)

    def vjp(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, o)
        gw = (g2.T @ cols).reshape(w.shape)
        gcols = (g2 @ wmat).reshape(n, ho, wo, c, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw] += (
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2))
        gx = gxp[:, :, ph:ph + h, pw:pw + wd] if (ph or pw) else gxp
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb
    return np.ascontiguousarray(out), vjp


@primitive("depthwise_conv2d")
def _depthwise_conv2d(x, w, b=None, pad=0):
    """Per-channel convolution, x (N, C, H, W), w (C, kh, kw), stride 1."""
    ph, pw = _pair(pad)
    if ph < 0 or pw < 0:
        raise InvalidAttr(f"depthwise_conv2d: pad must be >= 0, got {pad}")
    if w.ndim == 4 and w.shape[1] == 1:
        w = w[:, 0]
    if x.ndim != 4 or w.ndim != 3 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"depthwise_conv2d: input {x.shape} vs kernel {w.shape}")
    wshape_in = w.shape
    n, c, h, wd = x.shape
    _, kh, kw = w.shape
    hp, wp = h + 2 * ph, wd + 2 * pw
    if hp < kh or wp < kw:
        raise ShapeMismatch(f"depthwise_conv2d: kernel {kh}x{kw} larger than padded input")
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    ho, wo = hp - kh + 1, wp - kw + 1
    out = np.zeros((n, c, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            out += w[None, :, i, j, None, None] * xp[:, :, i:i + ho, j:j + wo]
    if b is not None:
        out += b[None, :, None, None]

    def vjp(g):
        gw = np.empty((c, kh, kw), dtype=x.dtype)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gw[:, i, j] = np.einsum("nchw,nchw->c", g, xp[:, :, i:i + ho, j:j + wo])
                gxp[:, :, i:i + ho, j:j + wo] += w[None, :, i, j, None, None] * g
        gx = gxp[:, :, ph:ph + h, pw:pw + wd] if (ph or pw) else gxp
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw.reshape(wshape_in) if len(wshape_in) == 3 else gw[:, None], gb
    return out, vjp


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

@primitive("layer_norm")
def _layer_norm(x, gamma=None, beta=None, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.dtype.type(eps))
    xhat = xc * inv
    out = xhat
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta

    def vjp(g):
        gxhat = g * gamma if gamma is not None else g
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(x.ndim - 1))
        ggamma = (g * xhat).sum(axis=lead) if gamma is not None else None
        gbeta = g.sum(axis=lead) if beta is not None else None
        return gx, ggamma, gbeta
    return out, vjp


@primitive("batch_norm")
def _batch_norm(x, gamma=None, beta=None, running_mean=None, running_var=None,
                training=True, momentum=0.1, eps=1e-5):
    """Per-channel normalization over (N, H, W) of an (N, C, H, W) input.

    ``running_mean``/``running_var`` are numpy buffers updated in place in
    training mode and used instead of batch statistics in eval mode.
    """
    if x.ndim != 4:
        raise ShapeMismatch(f"batch_norm expects (N, C, H, W), got {x.shape}")
    axes = (0, 2, 3)
    bshape = (1, -1, 1, 1)
    eps = x.dtype.type(eps)
    if training:
        mu = x.mean(axis=axes)
        xc = x - mu.reshape(bshape)
        var = (xc * xc).mean(axis=axes)
        m = x.size // x.shape[1]
        if running_mean is not None:
            running_mean *= 1 - momentum
            running_mean += momentum * mu
        if running_var is not None:
            unbiased = var * (m / max(m - 1, 1))
            running_var *= 1 - momentum
            running_var += momentum * unbiased
    else:
        if running_mean is None or running_var is None:
            raise InvalidAttr("batch_norm eval mode needs running statistics")
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
        xc = x - mu.reshape(bshape)
    inv = (1.0 / np.sqrt(var + eps)).reshape(bshape)
    xhat = xc * inv
    out = xhat
    if gamma is not None:
        out = out * gamma.reshape(bshape)
    if beta is not None:
        out = out + beta.reshape(bshape)

    def vjp(g):
        gxhat = g * gamma.reshape(bshape) if gamma is not None else g
        if training:
            gx = inv * (gxhat - gxhat.mean(axis=axes, keepdims=True)
                        - xhat * (gxhat * xhat).mean(axis=axes, keepdims=True))
        else:
            gx = gxhat * inv
        ggamma = (g * xhat).sum(axis=axes) if gamma is not None else None
        gbeta = g.sum(axis=axes) if beta is not None else None
        return gx, ggamma, gbeta
    return out, vjp


# ---------------------------------------------------------------------------
# pointwise nonlinearities
# ---------------------------------------------------------------------------

def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@primitive("relu")
def _relu(x):
    mask = x > 0
    return np.where(mask, x, 0).astype(x.dtype), lambda g: (g * mask,)


@primitive("silu")
def _silu(x):
    s = _sigmoid_np(x)
    return x * s, lambda g: (g * (s * (1 + x * (1 - s))),)


@primitive("sigmoid")
def _sigmoid(x):
    s = _sigmoid_np(x)
    return s, lambda g: (g * s * (1 - s),)


@primitive("softplus")
def _softplus(x):
    return np.logaddexp(x.dtype.type(0), x), lambda g: (g * _sigmoid_np(x),)


@primitive("exp")
def _exp(x):
    out = np.exp(x)
    return out, lambda g: (g * out,)


@primitive("log")
def _log(x):
    return np.log(x), lambda g: (g / x,)


@primitive("sqrt")
def _sqrt(x):
    out = np.sqrt(x)
    return out, lambda g: (g / (2 * out),)


@primitive("abs")
def _abs(x):
    return np.abs(x), lambda g: (g * np.sign(x),)


@primitive("norm")
def _norm(x):
    """Root of the sum of squares over every element; zero vector gets zero gradient."""
    n = np.sqrt((x * x).sum(dtype=x.dtype))
    out = np.asarray(n, dtype=x.dtype)

    def vjp(g):
        if n == 0:
            return (np.zeros_like(x),)
        return (g * x / n,)
    return out, vjp


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(np.asarray(g).reshape((1,) * len(shape)), shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


@primitive("sum")
def _sum(x, axis=None, keepdims=False):
    out = np.asarray(x.sum(axis=axis, keepdims=keepdims), dtype=x.dtype)
    return out, lambda g: (np.array(_expand_reduced(g, x.shape, axis, keepdims)),)


@primitive("mean")
def _mean(x, axis=None, keepdims=False):
    out = np.asarray(x.mean(axis=axis, keepdims=keepdims), dtype=x.dtype)
    n = x.size // max(out.size, 1)
    return out, lambda g: (np.array(_expand_reduced(g, x.shape, axis, keepdims)) / x.dtype.type(n),)


@primitive("max")
def _max(x, axis=None, keepdims=False):
    out = np.asarray(x.max(axis=axis, keepdims=keepdims), dtype=x.dtype)

    def vjp(g):
        full = _expand_reduced(out, x.shape, axis, keepdims)
        mask = (x == full).astype(x.dtype)
        count = mask.sum(axis=axis, keepdims=True)
        return (mask / count * _expand_reduced(g, x.shape, axis, keepdims),)
    return out, vjp


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

@primitive("reshape")
def _reshape(x, shape=()):
    try:
        out = x.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f"reshape: cannot view {x.shape} as {shape}") from None
    return out, lambda g: (g.reshape(x.shape),)


@primitive("transpose")
def _transpose(x, axes=None):
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    if sorted(axes) != list(range(x.ndim)):
        raise InvalidAttr(f"transpose: bad axes {axes} for rank {x.ndim}")
    inv = tuple(np.argsort(axes))
    return x.transpose(axes), lambda g: (g.transpose(inv),)


@primitive("concat")
def _concat(*xs, axis=0):
    try:
        out = np.concatenate(xs, axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"concat: {e}") from None
    bounds = np.cumsum([a.shape[axis] for a in xs])[:-1]
    return out, lambda g: tuple(np.split(g, bounds, axis=axis))


@primitive("slice")
def _slice(x, key=()):
    out = x[key]
    if isinstance(key, np.ndarray) or (isinstance(key, tuple) and any(isinstance(k, np.ndarray) for k in key)):
        raise InvalidAttr("slice supports basic indexing only; use gather")

    def vjp(g):
        gx = np.zeros_like(x)
        gx[key] = g
        return (gx,)
    return np.array(out), vjp


@primitive("reverse")
def _reverse(x, axis=0):
    return np.flip(x, axis=axis).copy(), lambda g: (np.flip(g, axis=axis).copy(),)


@primitive("pad")
def _pad(x, widths=()):
    widths = tuple(tuple(int(v) for v in w) for w in widths)
    if len(widths) != x.ndim or any(v < 0 for w in widths for v in w):
        raise InvalidAttr(f"pad: bad widths {widths} for rank {x.ndim}")
    out = np.pad(x, widths)
    key = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, x.shape))
    return out, lambda g: (g[key].copy(),)


@primitive("gather")
def _gather(table, index=None):
    """Rows of ``table`` (K, d) selected by integer ``index`` of any shape."""
    idx = np.asarray(index)
    out = table[idx]

    def vjp(g):
        gt = np.zeros_like(table)
        np.add.at(gt, idx.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (gt,)
    return out, vjp


@primitive("straight_through")
def _straight_through(z_e, z_q):
    """Forward value of ``z_q``; gradient passes to ``z_e`` unchanged."""
    if z_e.shape != z_q.shape:
        raise ShapeMismatch(f"straight_through: {z_e.shape} vs {z_q.shape}")
    return z_q.copy(), lambda g: (g, None)


# ---------------------------------------------------------------------------
# functional wrappers
# ---------------------------------------------------------------------------

def add(a, b):
    return apply_primitive("add", a, b)


def sub(a, b):
    return apply_primitive("sub", a, b)


def mul(a, b):
    return apply_primitive("mul", a, b)


def div(a, b):
    return apply_primitive("div", a, b)


def elementwise_scale(x, scale: float):
    return apply_primitive("elementwise_scale", x, scale=scale)


def matmul(a, b):
    return apply_primitive("matmul", a, b)


def linear(x, w, b=None):
    return apply_primitive("linear", x, w, b)


def conv2d(x, w, b=None, stride=1, pad=0):
    return apply_primitive("conv2d", x, w, b, stride=stride, pad=pad)


def depthwise_conv2d(x, w, b=None, pad=0):
    return apply_primitive("depthwise_conv2d", x, w, b, pad=pad)


def layer_norm(x, gamma=None, beta=None, eps=1e-5):
    return apply_primitive("layer_norm", x, gamma, beta, eps=eps)


def batch_norm(x, gamma=None, beta=None, running_mean=None, running_var=None,
               training=True, momentum=0.1, eps=1e-5):
    return apply_primitive("batch_norm", x, gamma, beta, running_mean=running_mean,
                           running_var=running_var, training=training,
                           momentum=momentum, eps=eps)


def relu(x):
    return apply_primitive("relu", x)


def silu(x):
    return apply_primitive("silu", x)


def sigmoid(x):
    return apply_primitive("sigmoid", x)


def softplus(x):
    return apply_primitive("softplus", x)


def exp(x):
    return apply_primitive("exp", x)


def log(x):
    return apply_primitive("log", x)


def sqrt(x):
    return apply_primitive("sqrt", x)


def abs_(x):
    return apply_primitive("abs", x)


def norm(x):
    return apply_primitive("norm", x)


def sum_(x, axis=None, keepdims=False):
    return apply_primitive("sum", x, axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims=False):
    return apply_primitive("mean", x, axis=axis, keepdims=keepdims)


def max_(x, axis=None, keepdims=False):
    return apply_primitive("max", x, axis=axis, keepdims=keepdims)


def reshape(x, shape):
    return apply_primitive("reshape", x, shape=tuple(shape))


def transpose(x, axes=None):
    return apply_primitive("transpose", x, axes=None if axes is None else tuple(axes))


def concat(xs: Sequence[Tensor], axis=0):
    return apply_primitive("concat", *xs, axis=axis)


def stack(xs: Sequence[Tensor], axis=0):
    return concat([reshape(x, x.shape[:axis] + (1,) + x.shape[axis:]) for x in xs], axis=axis)


def slice_(x, key):
    return apply_primitive("slice", x, key=key)


def reverse(x, axis=0):
    return apply_primitive("reverse", x, axis=axis)


def pad(x, widths):
    return apply_primitive("pad", x, widths=widths)


def gather(table, index):
    return apply_primitive("gather", table, index=index)


def straight_through(z_e, z_q):
    return apply_primitive("straight_through", z_e, z_q)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def build_tape(loss: Tensor) -> list[Tensor]:
    """Tensors reachable from ``loss`` in topological order (parents first)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack_:
        t, expanded = stack_.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack_.append((t, True))
        if t.node is not None:
            for p in t.node.parents:
                if p is not None and p.on_tape and id(p) not in seen:
                    stack_.append((p, False))
    return order


def backward(loss: Tensor, grad: np.ndarray | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.size != 1:
        raise NotScalar(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.on_tape:
        raise DetachedTensor("loss is not on the gradient tape")
    tape = build_tape(loss)
    grads: dict[int, np.ndarray] = {
        id(loss): np.ones_like(loss.data) if grad is None else np.asarray(grad, loss.dtype)}
    for t in reversed(tape):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.node is None:
            if t.requires_grad:
                g = np.asarray(g, dtype=t.dtype).reshape(t.shape)
                t.grad = g.copy() if t.grad is None else t.grad + g
            continue
        parent_grads = t.node.vjp(g)
        for p, pg in zip(t.node.parents, parent_grads):
            if p is None or pg is None or not p.on_tape:
                continue
            prev = grads.get(id(p))
            grads[id(p)] = pg if prev is None else prev + pg


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
