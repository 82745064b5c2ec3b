"""Dense tensors with a reverse-mode autodiff tape.

Values are numpy arrays; every traced operation records a closure that
scatters the upstream gradient back to its inputs. The graph is rebuilt on
each forward pass and released by ``backward``, so memory stays bounded by
one pass. Elementwise ops align shapes by the trailing axes only: operands
must have equal shapes, or the smaller shape must be a suffix of the larger
(a ``[d]`` vector may multiply a ``[S, d]`` matrix row-wise). No other
broadcasting is supported.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(ValueError):
    """An operation was called outside its contract (empty input, bad step...)."""


_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle finiteness checks after every traced op (slow; tests enable it)."""
    global _debug_checks
    _debug_checks = bool(enabled)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backfn")

    def __init__(self, data: np.ndarray, requires_grad: bool = False):
        self.data = data
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backfn: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __getitem__(self, idx) -> "Tensor":
        return getitem(self, idx)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


def tensor(data, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    """Wrap array-like data as a leaf tensor."""
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


def _trace(data: np.ndarray, parents: tuple[Tensor, ...], backfn) -> Tensor:
    if _debug_checks and not np.all(np.isfinite(data)):
        raise ArithmeticError("non-finite value produced by forward op")
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._backfn = backfn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        # Own the buffer so later accumulations can add in place.
        t.grad = np.array(g, copy=True)
    else:
        t.grad += g


def backward(loss: Tensor) -> None:
    """Propagate d(loss)/d(tensor) to every reachable requires_grad tensor.

    The loss must be scalar. Gradients accumulate across calls until cleared;
    the recorded graph is released afterwards, so a fresh forward pass is
    needed before differentiating again.
    """
    if loss.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    # Iterative topological order: the tape can be deeper than the default
    # recursion limit (long LSTM / multi-step reasoning chains).
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backfn is not None and node.grad is not None:
            node._backfn(node.grad)
        node._parents = ()
        node._backfn = None


# ---------------------------------------------------------------------------
# elementwise ops (trailing-axis alignment)

def _check_suffix(a: tuple[int, ...], b: tuple[int, ...], op: str) -> None:
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    if short and long_[len(long_) - len(short):] != short:
        raise ShapeError(f"{op}: shape {a} is not trailing-compatible with {b}")


def _reduce_to(shape: tuple[int, ...], g: np.ndarray) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    return g


def _coerce(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def add(x: Tensor, y) -> Tensor:
    y = _coerce(y, x)
    _check_suffix(x.shape, y.shape, "add")
    out = _trace(x.data + y.data, (x, y), None)

    def backfn(g):
        _accumulate(x, _reduce_to(x.shape, g))
        _accumulate(y, _reduce_to(y.shape, g))

    out._backfn = backfn
    return out


def sub(x: Tensor, y) -> Tensor:
    y = _coerce(y, x)
    _check_suffix(x.shape, y.shape, "sub")
    out = _trace(x.data - y.data, (x, y), None)

    def backfn(g):
        _accumulate(x, _reduce_to(x.shape, g))
        _accumulate(y, _reduce_to(y.shape, -g))

    out._backfn = backfn
    return out


def mul(x: Tensor, y) -> Tensor:
    y = _coerce(y, x)
    _check_suffix(x.shape, y.shape, "mul")
    out = _trace(x.data * y.data, (x, y), None)

    def backfn(g):
        _accumulate(x, _reduce_to(x.shape, g * y.data))
        _accumulate(y, _reduce_to(y.shape, g * x.data))

    out._backfn = backfn
    return out


def neg(x: Tensor) -> Tensor:
    out = _trace(-x.data, (x,), None)
    out._backfn = lambda g: _accumulate(x, -g)
    return out


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out = _trace(x.data * c, (x,), None)
    out._backfn = lambda g: _accumulate(x, g * c)
    return out


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not xs:
        raise ContractError("concat of an empty sequence")
    base = xs[0].shape
    for t in xs[1:]:
        if len(t.shape) != len(base) or any(
            i != (axis % len(base)) and t.shape[i] != base[i] for i in range(len(base))
        ):
            raise ShapeError(f"concat: shape {t.shape} incompatible with {base} on axis {axis}")
    out = _trace(np.concatenate([t.data for t in xs], axis=axis), tuple(xs), None)
    sizes = [t.shape[axis] for t in xs]
    splits = np.cumsum(sizes)[:-1]

    def backfn(g):
        for t, piece in zip(xs, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    out._backfn = backfn
    return out


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not xs:
        raise ContractError("stack of an empty sequence")
    out = _trace(np.stack([t.data for t in xs], axis=axis), tuple(xs), None)

    def backfn(g):
        for i, t in enumerate(xs):
            _accumulate(t, np.take(g, i, axis=axis))

    out._backfn = backfn
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = _trace(x.data.reshape(shape), (x,), None)
    out._backfn = lambda g: _accumulate(x, g.reshape(x.shape))
    return out


def _is_basic_index(idx) -> bool:
    if isinstance(idx, (int, np.integer, slice)):
        return True
    if isinstance(idx, tuple):
        return all(isinstance(i, (int, np.integer, slice)) for i in idx)
    return False


def getitem(x: Tensor, idx) -> Tensor:
    out = _trace(np.asarray(x.data[idx]), (x,), None)
    basic = _is_basic_index(idx)

    def backfn(g):
        if not x.requires_grad:
            return
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        if basic:
            # Basic indexing never repeats elements, so slice-add suffices.
            x.grad[idx] += g
        else:
            np.add.at(x.grad, idx, g)

    out._backfn = backfn
    return out


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = _trace(np.ascontiguousarray(x.data.transpose(axes)), (x,), None)
    inverse = tuple(np.argsort(axes))
    out._backfn = lambda g: _accumulate(x, g.transpose(inverse))
    return out


# ---------------------------------------------------------------------------
# reductions

def _normalize_axes(axes, ndim: int) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(a % ndim for a in axes)


def tsum(x: Tensor, axes=None) -> Tensor:
    axes = _normalize_axes(axes, x.ndim)
    out = _trace(x.data.sum(axis=axes), (x,), None)

    def backfn(g):
        expanded = np.expand_dims(g, axes) if axes else g
        _accumulate(x, np.broadcast_to(expanded, x.shape))

    out._backfn = backfn
    return out


def tmean(x: Tensor, axes=None) -> Tensor:
    axes = _normalize_axes(axes, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    out = _trace(x.data.mean(axis=axes), (x,), None)

    def backfn(g):
        expanded = np.expand_dims(g, axes) if axes else g
        _accumulate(x, np.broadcast_to(expanded, x.shape) / count)

    out._backfn = backfn
    return out


def weighted_sum(weights: Tensor, items: Tensor) -> Tensor:
    """Mix ``items[i, ...]`` by ``weights[i]``: out = sum_i w[i] * items[i]."""
    if weights.ndim != 1 or items.shape[0] != weights.shape[0]:
        raise ShapeError(
            f"weighted_sum: weights {weights.shape} do not index items {items.shape}"
        )
    out = _trace(np.tensordot(weights.data, items.data, axes=(0, 0)), (weights, items), None)

    def backfn(g):
        rest = tuple(range(1, items.ndim))
        _accumulate(weights, np.tensordot(items.data, g, axes=(rest, tuple(range(g.ndim)))))
        _accumulate(items, np.multiply.outer(weights.data, g))

    out._backfn = backfn
    return out


# ---------------------------------------------------------------------------
# linear algebra and nonlinearities

def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """y = x @ w.T (+ b) over the trailing axis of x; w is [out, in]."""
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"linear: input shape {x.shape} does not match weight shape {w.shape}")
    y = x.data @ w.data.T
    if b is not None:
        if b.shape != (w.shape[0],):
            raise ShapeError(f"linear: bias shape {b.shape} does not match weight shape {w.shape}")
        y = y + b.data
    parents = (x, w) if b is None else (x, w, b)
    out = _trace(y, parents, None)
    n, m = w.shape[1], w.shape[0]

    def backfn(g):
        g2 = g.reshape(-1, m)
        x2 = x.data.reshape(-1, n)
        _accumulate(x, (g @ w.data).reshape(x.shape))
        _accumulate(w, g2.T @ x2)
        if b is not None:
            _accumulate(b, g2.sum(axis=0))

    out._backfn = backfn
    return out


def softmax(x: Tensor) -> Tensor:
    """Softmax over the trailing axis, stabilized by max subtraction."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = _trace(y, (x,), None)

    def backfn(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accumulate(x, y * (g - dot))

    out._backfn = backfn
    return out


def elu(x: Tensor) -> Tensor:
    y = np.where(x.data >= 0, x.data, np.expm1(x.data))
    out = _trace(y, (x,), None)
    out._backfn = lambda g: _accumulate(x, g * np.where(x.data >= 0, 1.0, y + 1.0))
    return out


def relu(x: Tensor) -> Tensor:
    out = _trace(np.maximum(x.data, 0), (x,), None)
    out._backfn = lambda g: _accumulate(x, g * (x.data > 0))
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    out = _trace(y, (x,), None)
    out._backfn = lambda g: _accumulate(x, g * y * (1.0 - y))
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = _trace(y, (x,), None)
    out._backfn = lambda g: _accumulate(x, g * (1.0 - y * y))
    return out


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    out = _trace(y, (x,), None)
    out._backfn = lambda g: _accumulate(x, g * y)
    return out


def log(x: Tensor) -> Tensor:
    out = _trace(np.log(x.data), (x,), None)
    out._backfn = lambda g: _accumulate(x, g / x.data)
    return out


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup into [V, e] with scatter-add gradient (repeats accumulate)."""
    ids = np.asarray(ids, dtype=np.int64)
    out = _trace(table.data[ids], (table,), None)

    def backfn(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, g)

    out._backfn = backfn
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate == 0."""
    if rate <= 0.0:
        return x
    if rate >= 1.0:
        raise ContractError(f"dropout rate must be < 1, got {rate}")
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    out = _trace(x.data * mask, (x,), None)
    out._backfn = lambda g: _accumulate(x, g * mask)
    return out


def cross_entropy_logits(logits: Tensor, label: int) -> Tensor:
    """-log softmax(logits)[label], computed from logits for stability."""
    if logits.ndim != 1:
        raise ShapeError(f"cross_entropy expects a 1-d logit vector, got {logits.shape}")
    if not 0 <= label < logits.shape[0]:
        raise ContractError(f"label {label} outside logit range {logits.shape[0]}")
    # The max shift is treated as a constant; its total derivative cancels.
    shift = float(logits.data.max())
    centered = add(logits, np.asarray(-shift, dtype=logits.dtype))
    lse = log(tsum(exp(centered)))
    return sub(lse, centered[label])


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None
