"""Dense tensors with reverse-mode automatic differentiation on numpy.

Every operation records its inputs and a backward closure; ``backward`` on a
scalar loss walks the recorded graph in reverse topological order and
*accumulates* gradients into ``requires_grad`` leaves (a second backward pass
doubles them). Arrays are float64 unless the caller supplies float32 data.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        data = np.asarray(data)
        if data.dtype.kind != "f":
            data = data.astype(np.float64)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"<Tensor shape={self.data.shape}{tag}>"

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    # operator sugar; scalars are accepted on either side
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), scale(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / other)
        raise TypeError("tensor/tensor division is not supported")

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad or p._parents for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum out the axes numpy broadcasting added or stretched."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def parameter(data, name: str) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from None

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from None

    def backward(g):
        return (_unbroadcast(g * b.data, a.shape),
                _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def scale(a: Tensor, c) -> Tensor:
    c = float(c)

    def backward(g):
        return (g * c,)

    return _make(a.data * c, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    data = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(data, (a, b), backward)


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        if a.ndim < 2:
            raise ShapeError(f"transpose: need at least 2 dims, got {a.shape}")
        axes = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _make(np.transpose(a.data, axes), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    def backward(g):
        return (g.reshape(a.shape),)

    return _make(a.data.reshape(shape), (a,), backward)


def concat(tensors, axis: int) -> Tensor:
    tensors = [(_as_tensor(t)) for t in tensors]
    shapes = [t.shape for t in tensors]
    base = list(shapes[0])
    for s in shapes[1:]:
        trimmed = list(s)
        if len(trimmed) != len(base):
            raise ShapeError(f"concat: rank mismatch between {shapes[0]} and {s}")
        trimmed[axis] = base[axis]
        if trimmed != base:
            raise ShapeError(f"concat: incompatible shapes {shapes[0]} and {s}")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, offsets, axis=axis))

    return _make(data, tensors, backward)


def sum_(a: Tensor, axis=None, keepdims=False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(data, (a,), backward)


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        n = a.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.shape[ax] for ax in axis]))
    else:
        n = a.shape[axis]
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0

    def backward(g):
        return (g * keep,)

    return _make(np.where(keep, a.data, 0.0), (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along ``axis`` (max-subtraction)."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * p).sum(axis=axis, keepdims=True)
        return (p * (g - dot),)

    return _make(p, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ls = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(ls) * g.sum(axis=axis, keepdims=True),)

    return _make(ls, (a,), backward)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then apply affine."""
    if gain.shape != a.shape[-1:] or bias.shape != a.shape[-1:]:
        raise ShapeError(
            f"layer_norm: gain {gain.shape} / bias {bias.shape} must match "
            f"last axis of input {a.shape}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    data = xhat * gain.data + bias.data
    reduce_axes = tuple(range(a.ndim - 1))

    def backward(g):
        gy = g * gain.data
        d1 = gy.mean(axis=-1, keepdims=True)
        d2 = (gy * xhat).mean(axis=-1, keepdims=True)
        ga = (gy - d1 - xhat * d2) * inv
        ggain = (g * xhat).sum(axis=reduce_axes)
        gbias = g.sum(axis=reduce_axes)
        return ga, ggain, gbias

    return _make(data, (a, gain, bias), backward)


def dropout(a: Tensor, rate: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Zero elements with probability ``rate`` and rescale by 1/(1-rate).

    Identity when not training or rate is 0. The mask is drawn from ``rng``,
    so a fixed seed gives bit-identical masks.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    keep = rng.random(a.shape) >= rate
    factor = keep / (1.0 - rate)

    def backward(g):
        return (g * factor,)

    return _make(a.data * factor, (a,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table``; equivalent to one-hot matmul.

    Backward scatter-adds into the selected rows only, so a repeated id
    accumulates every contribution.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    data = table.data[ids]
    width = table.shape[1]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.ravel(), g.reshape(-1, width))
        return (gt,)

    return _make(data, (table,), backward)


def take(a: Tensor, indices, axis: int) -> Tensor:
    """Gather slices along ``axis``; backward scatter-adds into the source."""
    indices = np.asarray(indices, dtype=np.int64)
    data = np.take(a.data, indices, axis=axis)

    def backward(g):
        ga = np.zeros_like(a.data)
        moved = np.moveaxis(ga, axis, 0)
        np.add.at(moved, indices, np.moveaxis(g, axis, 0))
        return (ga,)

    return _make(data, (a,), backward)


def masked_fill(a: Tensor, mask, value: float) -> Tensor:
    """Replace entries where ``mask`` is True by ``value`` (no gradient there)."""
    mask = np.asarray(mask, dtype=bool)
    try:
        data = np.where(mask, value, a.data)
    except ValueError:
        raise ShapeError(
            f"masked_fill: mask {mask.shape} does not broadcast to {a.shape}"
        ) from None

    def backward(g):
        return (_unbroadcast(np.where(mask, 0.0, g), a.shape),)

    return _make(data, (a,), backward)


def cross_entropy_label_smoothed(logits: Tensor, target_ids, eps: float,
                                 pad_id=None, reduction: str = "mean") -> Tensor:
    """Label-smoothed cross entropy over the last axis of ``logits``.

    The target distribution puts 1-eps on the gold id and eps/(V-1) on every
    other class. Positions whose target equals ``pad_id`` are excluded from
    the reduction ("mean" divides by the number of kept positions).
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"smoothing factor must be in [0, 1), got {eps}")
    target_ids = np.asarray(target_ids, dtype=np.int64)
    if logits.shape[:-1] != target_ids.shape:
        raise ShapeError(
            f"cross_entropy: logits {logits.shape} do not match targets "
            f"{target_ids.shape}"
        )
    vocab = logits.shape[-1]
    keep = np.ones(target_ids.shape, dtype=bool) if pad_id is None else target_ids != pad_id
    n_kept = int(keep.sum())
    if n_kept == 0:
        raise ValueError("cross_entropy: every position is padding")

    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    ls = shifted - logz
    p = np.exp(ls)

    gold = np.take_along_axis(ls, target_ids[..., None], axis=-1)[..., 0]
    # sum_v q_v * log p_v decomposes into the gold term plus the smoothed rest
    others = ls.sum(axis=-1) - gold
    per_pos = -((1.0 - eps) * gold + (eps / (vocab - 1)) * others)
    total = float((per_pos * keep).sum())
    divisor = n_kept if reduction == "mean" else 1
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")

    q = np.full(logits.shape, eps / (vocab - 1))
    np.put_along_axis(q, target_ids[..., None], 1.0 - eps, axis=-1)

    def backward(g):
        return (g * (p - q) * keep[..., None] / divisor,)

    return _make(np.float64(total / divisor), (logits,), backward)


def backward(loss: Tensor) -> None:
    """Reverse-mode pass from a scalar; accumulates into leaf ``grad`` fields."""
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")

    order: list[Tensor] = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not (p.requires_grad or p._parents):
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
