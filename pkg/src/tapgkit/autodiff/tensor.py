"""Dense tensors with reverse-mode automatic differentiation.

Every differentiable op records itself on the innermost active :class:`Tape`;
``Tape.backward`` replays the records strictly in reverse execution order and
accumulates gradients into ``Tensor.grad``. Without an active tape, ops run in
plain inference mode and record nothing.

All tensors share one process-wide float precision (default float32); switch
it with :func:`set_default_dtype` or the :func:`default_dtype` context manager
before building a model.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Iterable, Sequence

import numpy as np

from tapgkit.errors import EmptyInputError, GraphError, ShapeError

_default_dtype = np.float32
_tls = threading.local()


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ShapeError(f"unsupported precision {dtype}; use float32 or float64")
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


@contextlib.contextmanager
def default_dtype(dtype):
    """Temporarily switch the process-wide tensor precision."""
    previous = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def _tape_stack() -> list:
    stack = getattr(_tls, "tapes", None)
    if stack is None:
        stack = []
        _tls.tapes = stack
    return stack


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense n-dimensional array, optionally tracked for gradients.

    ``data`` is a row-major numpy array in the process default precision.
    ``grad`` is a same-shape accumulator, present exactly when
    ``requires_grad`` is set; it is re-zeroed at the start of every backward
    pass over the tape the tensor was recorded on.
    """

    __slots__ = ("data", "requires_grad", "grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=get_default_dtype())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if self.requires_grad else None
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        """Run reverse-mode differentiation from this scalar."""
        if self._tape is None:
            raise GraphError("tensor was not recorded on a live tape")
        self._tape.backward(self)

    # ergonomic operator sugar; heavy lifting stays in the module functions
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


class _Record:
    __slots__ = ("out", "inputs", "fn")

    def __init__(self, out, inputs, fn):
        self.out = out
        self.inputs = inputs
        self.fn = fn


class Tape:
    """Ordered log of executed differentiable operations.

    Use as a context manager around a forward pass; ``backward`` replays the
    log once, in reverse. A consumed tape must be ``reset`` (or discarded)
    before recording again.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _tape_stack().pop()
        return False

    def __len__(self):
        return len(self._records)

    def record(self, out: Tensor, inputs: Sequence[Tensor], fn) -> None:
        if self._consumed:
            raise GraphError("tape already replayed; reset it before reuse")
        out._tape = self
        self._records.append(_Record(out, tuple(inputs), fn))

    def reset(self) -> None:
        self._records.clear()
        self._consumed = False

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if self._consumed:
            raise GraphError("tape already replayed; reset it before reuse")
        for rec in self._records:
            rec.out.zero_grad()
            for t in rec.inputs:
                t.zero_grad()
        if loss.requires_grad:
            loss.grad = np.ones_like(loss.data)
        for rec in reversed(self._records):
            if rec.out.grad is not None:
                rec.fn(rec.out.grad)
        self._consumed = True


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def constant(data) -> Tensor:
    """An untracked tensor (no gradient, never recorded)."""
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _from_op(data: np.ndarray, inputs: Sequence[Tensor], fn) -> Tensor:
    """Wrap an op result; record it when a tape is live and an input is tracked."""
    tape = _active_tape()
    tracked = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=get_default_dtype())
    out.requires_grad = tracked
    out.grad = np.zeros_like(out.data) if tracked else None
    out._tape = None
    if tracked:
        tape.record(out, [t for t in inputs if isinstance(t, Tensor)], fn)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _from_op(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _from_op(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _from_op(out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _from_op(-a.data, (a,), lambda g: _accum(a, -g))


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return _from_op(a.data * factor, (a,), lambda g: _accum(a, g * factor))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def backward(g):
        _accum(a, g * out)

    return _from_op(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def backward(g):
        _accum(a, g / a.data)

    return _from_op(out, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)

    def backward(g):
        _accum(a, g / (2.0 * out))

    return _from_op(out, (a,), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through unsaturated entries only."""
    out = np.clip(a.data, lo, hi)
    inside = ((a.data > lo) & (a.data < hi)).astype(a.data.dtype)

    def backward(g):
        _accum(a, g * inside)

    return _from_op(out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    mask = (a.data > 0.0).astype(a.data.dtype)

    def backward(g):
        _accum(a, g * mask)

    return _from_op(out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        _accum(a, g * out * (1.0 - out))

    return _from_op(out, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Axis-normalized exponential, computed with max-subtraction."""
    if a.data.shape[axis] == 0:
        raise ShapeError("softmax over an empty axis")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        _accum(a, out * (g - dot))

    return _from_op(out, (a,), backward)


# ---------------------------------------------------------------------------
# shape plumbing
# ---------------------------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape
    return _from_op(a.data.reshape(shape), (a,), lambda g: _accum(a, g.reshape(orig)))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.data.shape}")
    return _from_op(a.data.T, (a,), lambda g: _accum(a, g.T))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise EmptyInputError("concat of zero tensors")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    extents = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + extents)

    def backward(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, stop)
            _accum(t, g[tuple(sl)])

    return _from_op(out, tensors, backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise EmptyInputError("stack of zero tensors")
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        for i, t in enumerate(tensors):
            _accum(t, np.take(g, i, axis=axis))

    return _from_op(out, tensors, backward)


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows along axis 0; backward scatter-adds into them."""
    idx = np.asarray(indices, dtype=np.int64)
    out = a.data[idx]

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            _accum(a, buf)

    return _from_op(out, (a,), backward)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _check_axis(a: Tensor, axis):
    if axis is None:
        if a.data.size == 0:
            raise ShapeError("reduction over an empty tensor")
        return
    if a.data.shape[axis] == 0:
        raise ShapeError(f"reduction over empty axis {axis} of shape {a.data.shape}")


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    _check_axis(a, axis)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _from_op(out, (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    _check_axis(a, axis)
    count = a.data.size if axis is None else a.data.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape) / count)

    return _from_op(out, (a,), backward)


def l2_norm(a: Tensor, axis: int = -1) -> Tensor:
    """Euclidean norm along one axis."""
    _check_axis(a, axis)
    out = np.sqrt((a.data * a.data).sum(axis=axis))

    def backward(g):
        denom = np.where(out == 0.0, 1.0, out)
        gg = np.expand_dims(g / denom, axis)
        _accum(a, gg * a.data)

    return _from_op(out, (a,), backward)


# ---------------------------------------------------------------------------
# matrix product
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul expects two matrices")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _from_op(out, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``y = x @ W + b`` over the trailing axis of ``x``."""
    if weight.data.ndim != 2:
        raise ShapeError("linear weight must be a matrix")
    if x.data.shape[-1] != weight.data.shape[0]:
        raise ShapeError(
            f"linear input width {x.data.shape[-1]} != weight fan-in {weight.data.shape[0]}"
        )
    if bias is not None and bias.data.shape != (weight.data.shape[1],):
        raise ShapeError("linear bias extent must match weight fan-out")
    lead = x.data.shape[:-1]
    flat = x.data.reshape(-1, x.data.shape[-1])
    out = flat @ weight.data
    if bias is not None:
        out = out + bias.data
    out = out.reshape(*lead, weight.data.shape[1])

    def backward(g):
        gf = g.reshape(-1, weight.data.shape[1])
        _accum(x, (gf @ weight.data.T).reshape(x.data.shape))
        _accum(weight, flat.T @ gf)
        if bias is not None:
            _accum(bias, gf.sum(axis=0))

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _from_op(out, inputs, backward)


# ---------------------------------------------------------------------------
# cross-correlation (1/2/3-D), machine-learning "convolution"
# ---------------------------------------------------------------------------

def _conv_nd(x: Tensor, weight: Tensor, bias: Tensor | None, stride, padding, rank: int):
    if x.data.ndim != rank + 1:
        raise ShapeError(f"conv{rank}d input must have shape (channels, {'x'.join('LHW'[3-rank:])})")
    if weight.data.ndim != rank + 2:
        raise ShapeError(f"conv{rank}d weight must have rank {rank + 2}")
    c_in = x.data.shape[0]
    c_out = weight.data.shape[0]
    if weight.data.shape[1] != c_in:
        raise ShapeError(f"conv{rank}d channel mismatch: input {c_in}, weight {weight.data.shape[1]}")
    if bias is not None and bias.data.shape != (c_out,):
        raise ShapeError("conv bias extent must equal the filter count")
    stride = _tupleize(stride, rank)
    padding = _tupleize(padding, rank)
    kernel = weight.data.shape[2:]
    spatial = x.data.shape[1:]
    out_spatial = []
    for ext, k, s, p in zip(spatial, kernel, stride, padding):
        o = (ext + 2 * p - k) // s + 1
        if o <= 0:
            raise ShapeError(f"conv{rank}d output extent {o} <= 0 for input {spatial}, kernel {kernel}")
        out_spatial.append(o)

    pad_spec = [(0, 0)] + [(p, p) for p in padding]
    xp = np.pad(x.data, pad_spec) if any(padding) else x.data

    # im2col: windows has shape (c_in, *out_spatial, *kernel) after striding
    windows = np.lib.stride_tricks.sliding_window_view(xp, kernel, axis=tuple(range(1, rank + 1)))
    stride_idx = tuple(slice(None, None, s) for s in stride)
    windows = windows[(slice(None),) + stride_idx]
    cols = windows.reshape(c_in, int(np.prod(out_spatial)), int(np.prod(kernel)))
    cols = np.moveaxis(cols, 1, 0).reshape(int(np.prod(out_spatial)), -1)  # (P, c_in*k)
    wmat = weight.data.reshape(c_out, -1)
    out = cols @ wmat.T  # (P, c_out)
    if bias is not None:
        out = out + bias.data
    out = np.moveaxis(out.reshape(*out_spatial, c_out), -1, 0)

    def backward(g):
        gp = np.moveaxis(g, 0, -1).reshape(-1, c_out)  # (P, c_out)
        if weight.requires_grad:
            _accum(weight, (gp.T @ cols).reshape(weight.data.shape))
        if bias is not None:
            _accum(bias, gp.sum(axis=0))
        if x.requires_grad:
            gcols = gp @ wmat  # (P, c_in*k)
            gcols = gcols.reshape(*out_spatial, c_in, *kernel)
            gx = np.zeros_like(xp)
            # scatter one kernel offset at a time; kernels are small
            for offset in np.ndindex(*kernel):
                block = gcols[(Ellipsis, slice(None)) + offset]  # (*out_spatial, c_in)
                block = np.moveaxis(block, -1, 0)
                target = tuple(
                    slice(o, o + s * e, s) for o, s, e in zip(offset, stride, out_spatial)
                )
                gx[(slice(None),) + target] += block
            if any(padding):
                trim = tuple(slice(p, p + e) for p, e in zip(padding, spatial))
                gx = gx[(slice(None),) + trim]
            _accum(x, gx)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _from_op(out, inputs, backward)


def _tupleize(value, rank: int):
    if isinstance(value, int):
        return (value,) * rank
    value = tuple(value)
    if len(value) != rank:
        raise ShapeError(f"expected {rank} stride/padding entries, got {len(value)}")
    return value


def conv1d(x, weight, bias=None, stride=1, padding=0):
    return _conv_nd(x, weight, bias, stride, padding, rank=1)


def conv2d(x, weight, bias=None, stride=1, padding=0):
    return _conv_nd(x, weight, bias, stride, padding, rank=2)


def conv3d(x, weight, bias=None, stride=1, padding=0):
    return _conv_nd(x, weight, bias, stride, padding, rank=3)


def mean_pool(a: Tensor, axis: int) -> Tensor:
    """Arithmetic mean along one axis (alias kept for pooling call sites)."""
    return mean(a, axis=axis)


def all_finite(t: Tensor) -> bool:
    return bool(np.isfinite(t.data).all())
