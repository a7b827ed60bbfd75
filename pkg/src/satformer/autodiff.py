"""A small tape-based reverse-mode autodiff engine over numpy arrays.

Operations executed inside ``with Tape() as tape:`` on tensors that require
gradients are appended to the tape; ``tape.backward(loss)`` replays the
records in reverse and accumulates ``.grad`` on leaf tensors (parameters).
Everything is float64.
"""

from __future__ import annotations

import contextvars
from collections import OrderedDict
from typing import Callable, Iterable, Sequence

import numpy as np

_active_tape: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("tape", default=None)


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_node")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._node: tuple[int, int] | None = None  # (id(tape), record index)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Append-only record of operations; append order is topological order."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc):
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self):
        return len(self.records)

    def append(self, out: Tensor, inputs: tuple[Tensor, ...], rule: Callable) -> None:
        out._node = (id(self), len(self.records))
        self.records.append((out, inputs, rule))

    def backward(self, loss: Tensor) -> None:
        if loss.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._node is None or loss._node[0] != id(self):
            raise ValueError("loss is not recorded on this tape (detached graph)")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, inputs, rule in reversed(self.records[: loss._node[1] + 1]):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            in_grads = rule(g)
            for t, gi in zip(inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                if t._node is None:  # leaf
                    t.grad = gi.copy() if t.grad is None else t.grad + gi
                else:
                    key = id(t)
                    grads[key] = gi if key not in grads else grads[key] + gi


def no_tape():
    """Context in which operations are not recorded."""

    class _NoTape:
        def __enter__(self):
            self._token = _active_tape.set(None)

        def __exit__(self, *exc):
            _active_tape.reset(self._token)

    return _NoTape()


def _op(out_data: np.ndarray, inputs: Sequence[Tensor], rule: Callable) -> Tensor:
    out = Tensor(out_data)
    tape = _active_tape.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.append(out, tuple(inputs), rule)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, opname: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{opname}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _op(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _op(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _op(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(x: Tensor, c: float) -> Tensor:
    return _op(x.data * c, (x,), lambda g: (g * c,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return _op(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _op(y, (x,), lambda g: (g * (1.0 - y * y),))


def log(x: Tensor) -> Tensor:
    return _op(np.log(x.data), (x,), lambda g: (g / x.data,))


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)
    return _op(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


# ---------------------------------------------------------------- linear algebra


def matmul(a, b) -> Tensor:
    """Matrix product; N-D operands are batched as in ``np.matmul``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    if b.data.ndim == 2:
        # flatten leading dims so the weight gradient is one GEMM
        a2 = a.data.reshape(-1, a.shape[-1])

        def rule(g):
            g2 = g.reshape(-1, g.shape[-1])
            return (g2 @ b.data.T).reshape(a.shape), a2.T @ g2

        return _op((a2 @ b.data).reshape(a.shape[:-1] + (b.shape[-1],)), (a, b), rule)

    def rule(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _op(a.data @ b.data, (a, b), rule)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    y = matmul(x, w)
    return y if b is None else add(y, b)


# ---------------------------------------------------------------- reductions / normalizers


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _op(out, (x,), rule)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis (row-max subtracted)."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    return _op(y, (x,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


def log_softmax(x: Tensor) -> Tensor:
    """Log-softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    p = np.exp(y)
    return _op(y, (x,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply broadcast ``gain``/``bias``."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def rule(g):
        gx_hat = g * gain.data
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _op(out, (x, gain, bias), rule)


def max_pool_rows(x: Tensor) -> Tensor:
    """Column-wise maximum of a 2-D tensor; returns a 1-D row vector."""
    if x.data.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"max_pool_rows needs a non-empty 2-D tensor, got {x.shape}")
    arg = x.data.argmax(axis=0)
    cols = np.arange(x.shape[1])

    def rule(g):
        gx = np.zeros_like(x.data)
        gx[arg, cols] = g
        return (gx,)

    return _op(x.data[arg, cols], (x,), rule)


def segment_max_rows(x: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Column-wise maximum of the rows of each segment -> (num_segments, cols).

    Every segment must own at least one row.
    """
    segments = np.asarray(segments, dtype=np.int64)
    if x.data.ndim != 2 or len(segments) != x.shape[0]:
        raise ShapeError(f"segment_max_rows: {x.shape} vs {len(segments)} segment ids")
    out = np.full((num_segments, x.shape[1]), -np.inf)
    np.maximum.at(out, segments, x.data)
    if np.isinf(out).any():
        raise ShapeError("segment_max_rows: empty segment")
    # first row attaining the max wins the gradient
    hit = x.data == out[segments]
    order = np.arange(x.shape[0])
    first = np.full((num_segments, x.shape[1]), x.shape[0], dtype=np.int64)
    rows = np.where(hit, order[:, None], x.shape[0])
    np.minimum.at(first, segments, rows)
    cols = np.broadcast_to(np.arange(x.shape[1]), first.shape)

    def rule(g):
        gx = np.zeros_like(x.data)
        gx[first, cols] = g
        return (gx,)

    return _op(out, (x,), rule)


# ---------------------------------------------------------------- shape / indexing


def reshape(x: Tensor, shape) -> Tensor:
    return _op(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(range(x.data.ndim))[::-1] if axes is None else tuple(axes)
    inverse = np.argsort(axes)
    return _op(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[t.shape for t in tensors]}: {exc}") from None
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _op(out, tensors, lambda g: tuple(np.split(g, splits, axis=axis)))


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=0)


def concat_cols(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=-1)


def _is_basic_key(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (slice, int, type(Ellipsis))) or k is None for k in parts)


def index(x: Tensor, key) -> Tensor:
    out = x.data[key]
    basic = _is_basic_key(key)

    def rule(g):
        gx = np.zeros_like(x.data)
        if basic:
            gx[key] = g
        else:
            np.add.at(gx, key, g)
        return (gx,)

    return _op(np.array(out), (x,), rule)


def _segment_sum(values: np.ndarray, idx: np.ndarray, num_rows: int) -> np.ndarray:
    """``out[idx[r]] += values[r]`` via sort + reduceat (much faster than add.at)."""
    out = np.zeros((num_rows,) + values.shape[1:])
    if len(idx) == 0:
        return out
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])
    out[sorted_idx[starts]] = np.add.reduceat(values[order], starts, axis=0)
    return out


def gather_rows(x: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {x.shape[0]} rows")
    return _op(x.data[idx], (x,), lambda g: (_segment_sum(g, idx, x.shape[0]),))


def scatter_add_rows(x: Tensor, idx, num_rows: int) -> Tensor:
    """``out[idx[r]] += x[r]`` into a zero tensor with ``num_rows`` rows."""
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) != x.shape[0]:
        raise ShapeError(f"scatter_add_rows: {x.shape[0]} rows vs {len(idx)} indices")
    if idx.size and (idx.min() < 0 or idx.max() >= num_rows):
        raise ShapeError(f"scatter_add_rows: index out of range for {num_rows} rows")
    return _op(_segment_sum(x.data, idx, num_rows), (x,), lambda g: (g[idx],))


def segment_log_softmax(x: Tensor, segments, num_segments: int) -> Tensor:
    """Log-softmax of a 1-D tensor within each segment."""
    seg = np.asarray(segments, dtype=np.int64)
    mx = np.full(num_segments, -np.inf)
    np.maximum.at(mx, seg, x.data)
    z = x.data - mx[seg]
    lse = np.log(_segment_sum(np.exp(z), seg, num_segments))
    y = z - lse[seg]
    p = np.exp(y)
    return _op(y, (x,), lambda g: (g - p * _segment_sum(g, seg, num_segments)[seg],))


# ---------------------------------------------------------------- parameters


class ParamStore:
    """Ordered name -> trainable Tensor map."""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def values(self) -> Iterable[Tensor]:
        return self._params.values()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def num_scalars(self) -> int:
        return int(np.sum([t.size for t in self._params.values()], dtype=np.int64))

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, t.data.copy()) for k, t in self._params.items())

    def load_state_dict(self, state: dict) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, t in self._params.items():
            value = np.asarray(state[k], dtype=np.float64)
            if value.shape != t.shape:
                raise ShapeError(f"{k}: expected shape {t.shape}, got {value.shape}")
            t.data = value.copy()


def param_count(params: ParamStore) -> int:
    return params.num_scalars()


class Adam:
    """Adam with decoupled weight decay (``p -= lr*wd*p`` before the moment update)."""

    def __init__(self, params: ParamStore, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def step(self) -> None:
        for name, t in self.params.items():
            if t.grad is None:
                raise ValueError(f"parameter {name!r} has no gradient")
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for name, t in self.params.items():
            g = t.grad
            if self.weight_decay:
                t.data = t.data - self.lr * self.weight_decay * t.data
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            m_hat = self.m[name] / c1
            v_hat = self.v[name] / c2
            t.data = t.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params: ParamStore, state: Adam | None = None, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0) -> Adam:
    """Functional wrapper: apply one Adam step, creating the state on first use."""
    if state is None:
        state = Adam(params, lr, beta1, beta2, eps, weight_decay)
    state.step()
    return state
