"""Reverse-mode automatic differentiation over numpy arrays.

A small tape-based engine: every operation returns a new :class:`Tensor`
holding the result plus a closure that routes upstream gradients to its
parents.  Calling ``backward()`` on a scalar loss walks the tape in reverse
topological order.  Arrays are float32 in training; all operations preserve
float64 inputs so gradient checks can run at full precision.

Every operation guards its output against NaN/Inf and raises
:class:`~tower.errors.NumericError` naming the producing op, so numerical
blow-ups surface where they happen rather than in the loss.

Tensors are not thread-safe for concurrent mutation; forward/backward on a
frozen parameter set may run concurrently across processes.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import ConfigError, DataError, NumericError, UsageError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference/validation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by op {op!r}")


class Tensor:
    """An ndarray with an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf", _parents=()):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        _check_finite(arr, op)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = None
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Populate gradients of every tensor this scalar depends on."""
        if self.data.size != 1:
            raise UsageError("backward() requires a scalar loss tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape}, dtype={self.data.dtype})"

    # operator sugar; scalars and plain ndarrays act as constants
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, scalar):
        return mul(self, 1.0 / float(scalar))

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], op: str) -> Tensor:
    requires = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires, op=op,
                 _parents=tuple(p for p in parents if requires))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = _make(a.data + b.data, (a, b), "add")
    if out.requires_grad:
        def _bw(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape))
        out._backward = _bw
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = _make(a.data - b.data, (a, b), "sub")
    if out.requires_grad:
        def _bw(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(-_unbroadcast(g, b.data.shape))
        out._backward = _bw
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = _make(a.data * b.data, (a, b), "mul")
    if out.requires_grad:
        def _bw(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape))
        out._backward = _bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise UsageError("matmul expects 2-D operands")
    out = _make(a.data @ b.data, (a, b), "matmul")
    if out.requires_grad:
        def _bw(g):
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        out._backward = _bw
    return out


def transpose(x: Tensor, axes=None) -> Tensor:
    x = _as_tensor(x)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.data.ndim)))
    out = _make(np.transpose(x.data, axes).copy(), (x,), "transpose")
    if out.requires_grad:
        inverse = tuple(np.argsort(axes))
        def _bw(g):
            x._accumulate(np.transpose(g, inverse))
        out._backward = _bw
    return out


def reshape(x: Tensor, shape) -> Tensor:
    x = _as_tensor(x)
    out = _make(np.reshape(x.data, shape), (x,), "reshape")
    if out.requires_grad:
        def _bw(g):
            x._accumulate(g.reshape(x.data.shape))
        out._backward = _bw
    return out


def concat(tensors, axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat")
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)
        def _bw(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(lo, hi)
                    t._accumulate(g[tuple(idx)])
        out._backward = _bw
    return out


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = _make(np.maximum(x.data, 0.0), (x,), "relu")
    if out.requires_grad:
        def _bw(g):
            x._accumulate(g * (x.data > 0.0))
        out._backward = _bw
    return out


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    s[~pos] = ez / (1.0 + ez)
    out = _make(s, (x,), "sigmoid")
    if out.requires_grad:
        def _bw(g):
            x._accumulate(g * s * (1.0 - s))
        out._backward = _bw
    return out


def exp(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    e = np.exp(x.data)
    out = _make(e, (x,), "exp")
    if out.requires_grad:
        def _bw(g):
            x._accumulate(g * e)
        out._backward = _bw
    return out


def log(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = _make(np.log(x.data), (x,), "log")
    if out.requires_grad:
        def _bw(g):
            x._accumulate(g / x.data)
        out._backward = _bw
    return out


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    axes = _norm_axis(axis, x.data.ndim)
    out = _make(x.data.sum(axis=axes, keepdims=keepdims), (x,), "sum")
    if out.requires_grad:
        def _bw(g):
            if not keepdims:
                g = np.expand_dims(g, axes)
            x._accumulate(np.broadcast_to(g, x.data.shape))
        out._backward = _bw
    return out


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    axes = _norm_axis(axis, x.data.ndim)
    count = float(np.prod([x.data.shape[a] for a in axes]))
    out = _make(x.data.mean(axis=axes, keepdims=keepdims), (x,), "mean")
    if out.requires_grad:
        def _bw(g):
            if not keepdims:
                g = np.expand_dims(g, axes)
            x._accumulate(np.broadcast_to(g, x.data.shape) / count)
        out._backward = _bw
    return out


def logsumexp(x: Tensor, axis: int) -> Tensor:
    """Numerically stable log(sum(exp(x))) along ``axis``."""
    x = _as_tensor(x)
    m = x.data.max(axis=axis, keepdims=True)
    shifted = np.exp(x.data - m)
    total = shifted.sum(axis=axis, keepdims=True)
    out_data = np.squeeze(m + np.log(total), axis=axis)
    out = _make(out_data, (x,), "logsumexp")
    if out.requires_grad:
        softmax = shifted / total
        def _bw(g):
            x._accumulate(np.expand_dims(g, axis) * softmax)
        out._backward = _bw
    return out


def l2_normalize(x: Tensor, axis: int = 1) -> Tensor:
    """Scale rows (along ``axis``) to unit Euclidean norm.

    Zero-norm rows are reported as a numeric error, never patched with an
    epsilon.
    """
    x = _as_tensor(x)
    n = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    if np.any(n == 0.0):
        raise NumericError("cannot l2-normalize a zero-norm vector")
    y = x.data / n
    out = _make(y, (x,), "l2_normalize")
    if out.requires_grad:
        def _bw(g):
            dot = (g * y).sum(axis=axis, keepdims=True)
            x._accumulate((g - y * dot) / n)
        out._backward = _bw
    return out


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """View of all kh x kw patches: (N, C, kh, kw, Ho, Wo)."""
    n, c, h, w = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    sn, sc, sh, sw = x.strides
    return as_strided(x, shape=(n, c, kh, kw, ho, wo),
                      strides=(sn, sc, sh, sw, sh, sw))


def _corr2d(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Valid cross-correlation: x (N,C,H,W) with w (O,C,kh,kw) -> (N,O,Ho,Wo)."""
    cols = _im2col(x, w.shape[2], w.shape[3])
    out = np.tensordot(w, cols, axes=([1, 2, 3], [1, 2, 3]))
    return out.transpose(1, 0, 2, 3)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, padding: int = 0) -> Tensor:
    """2-D convolution (cross-correlation), stride 1, symmetric zero padding."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise UsageError("conv2d expects x (N,C,H,W) and w (O,C,kh,kw)")
    if x.data.shape[1] != w.data.shape[1]:
        raise DataError(f"conv2d channel mismatch: input {x.data.shape} vs kernel {w.data.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) \
        if padding else x.data
    out_data = _corr2d(xp, w.data)
    if b is not None:
        b = _as_tensor(b)
        out_data = out_data + b.data[None, :, None, None]
    parents = (x, w) if b is None else (x, w, b)
    out = _make(out_data, parents, "conv2d")
    if out.requires_grad:
        kh, kw = w.data.shape[2], w.data.shape[3]
        def _bw(g):
            if w.requires_grad:
                cols = _im2col(xp, kh, kw)
                gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 4, 5]))
                w._accumulate(gw)
            if b is not None and b.requires_grad:
                b._accumulate(g.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                gfull = np.pad(g, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
                wt = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
                gxp = _corr2d(gfull, wt)
                if padding:
                    gxp = gxp[:, :, padding:-padding, padding:-padding]
                x._accumulate(gxp)
        out._backward = _bw
    return out


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine layer x @ w + b for x (N,K), w (K,M), b (M,)."""
    return add(matmul(x, w), b)


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; gradient routes to the first max."""
    x = _as_tensor(x)
    n, c, h, w = x.data.shape
    if h % size or w % size:
        raise ConfigError(f"max_pool2d requires dims divisible by {size}, got {h}x{w}")
    ho, wo = h // size, w // size
    windows = (x.data.reshape(n, c, ho, size, wo, size)
               .transpose(0, 1, 2, 4, 3, 5)
               .reshape(n, c, ho, wo, size * size))
    idx = windows.argmax(axis=-1)
    out_data = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
    out = _make(out_data, (x,), "max_pool2d")
    if out.requires_grad:
        def _bw(g):
            gw = np.zeros_like(windows)
            np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
            gx = (gw.reshape(n, c, ho, wo, size, size)
                  .transpose(0, 1, 2, 4, 3, 5)
                  .reshape(n, c, h, w))
            x._accumulate(gx)
        out._backward = _bw
    return out


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    x = _as_tensor(x)
    out_data = x.data.repeat(factor, axis=2).repeat(factor, axis=3)
    out = _make(out_data, (x,), "upsample_nearest")
    if out.requires_grad:
        n, c, h, w = x.data.shape
        def _bw(g):
            x._accumulate(g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)))
        out._backward = _bw
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of integer ``labels`` under row-wise softmax."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels)
    if logits.data.ndim != 2 or labels.shape != (logits.data.shape[0],):
        raise DataError(
            f"expected logits (N,K) with labels (N,), got {logits.data.shape} and {labels.shape}")
    n, k = logits.data.shape
    if labels.min() < 0 or labels.max() >= k:
        raise DataError("label index outside the logit columns")
    m = logits.data.max(axis=1, keepdims=True)
    shifted = logits.data - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    out = _make(np.asarray(-logp[np.arange(n), labels].mean()), (logits,), "softmax_cross_entropy")
    if out.requires_grad:
        softmax = np.exp(logp)
        def _bw(g):
            grad = softmax.copy()
            grad[np.arange(n), labels] -= 1.0
            logits._accumulate(g * grad / n)
        out._backward = _bw
    return out
