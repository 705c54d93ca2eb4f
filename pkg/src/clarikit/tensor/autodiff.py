"""Dense float64 tensors with reverse-mode automatic differentiation.

Small and explicit by design: every op records its inputs and a closure that
pushes the output adjoint back to them.  backward() runs the closures in
reverse topological order.  Values are never mutated by ops, so tensors can
be shared freely; only the optimizer writes to parameter data in place.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class GraphError(RuntimeError):
    """Backward called on a detached graph or more than once."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "_op", "_backward_done")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, _op=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = _parents
        self._backward_fn: Callable[[np.ndarray], None] | None = _backward
        self._op = _op
        self._backward_done = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable
        requires_grad tensor.  A second call on the same node is an error;
        rebuild the graph instead."""
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphError("loss is detached from the graph (requires_grad is False)")
        if self._backward_done:
            raise GraphError("backward already ran for this node; rebuild the graph")
        self._backward_done = True

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad over axes that were added or broadcast in the forward pass."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _make(data, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=requires, _parents=parents, _backward=backward if requires else None, _op=op)


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad, a.shape))
        _accumulate(b, _unbroadcast(grad, b.shape))

    return _make(out_data, (a, b), backward, "add")


def neg(a: Tensor) -> Tensor:
    def backward(grad):
        _accumulate(a, -grad)

    return _make(-a.data, (a,), backward, "neg")


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad * b.data, a.shape))
        _accumulate(b, _unbroadcast(grad * a.data, b.shape))

    return _make(out_data, (a, b), backward, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(grad):
        _accumulate(a, grad @ b.data.T)
        _accumulate(b, a.data.T @ grad)

    return _make(out_data, (a, b), backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    def backward(grad):
        _accumulate(a, grad.T)

    return _make(a.data.T, (a,), backward, "transpose")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(grad):
        offset = 0
        for t, size in zip(tensors, sizes):
            index = [slice(None)] * grad.ndim
            index[axis] = slice(offset, offset + size)
            _accumulate(t, grad[tuple(index)])
            offset += size

    return _make(out_data, tuple(tensors), backward, "concat")


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 1-row tensors (1, d) into (n, d)."""
    return concat(tensors, axis=0)


def split(a: Tensor, sections: int, axis: int = -1) -> list[Tensor]:
    axis = axis % a.data.ndim
    if a.shape[axis] % sections != 0:
        raise ValueError(f"cannot split axis of size {a.shape[axis]} into {sections} sections")
    pieces = np.split(a.data, sections, axis=axis)
    width = a.shape[axis] // sections
    outs = []
    for i, piece in enumerate(pieces):
        def backward(grad, i=i):
            full = np.zeros_like(a.data)
            index = [slice(None)] * a.data.ndim
            index[axis] = slice(i * width, (i + 1) * width)
            full[tuple(index)] = grad
            _accumulate(a, full)

        outs.append(_make(piece, (a,), backward, "split"))
    return outs


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        g = np.asarray(grad)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape).copy())

    return _make(out_data, (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


def relu(a: Tensor) -> Tensor:
    mask = (a.data > 0).astype(np.float64)

    def backward(grad):
        _accumulate(a, grad * mask)

    return _make(a.data * mask, (a,), backward, "relu")


def log(a: Tensor) -> Tensor:
    if (a.data <= 0).any():
        raise ValueError("log of non-positive value")

    def backward(grad):
        _accumulate(a, grad / a.data)

    return _make(np.log(a.data), (a,), backward, "log")


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(grad):
        _accumulate(a, grad * out_data)

    return _make(out_data, (a,), backward, "exp")


def sigmoid(a: Tensor) -> Tensor:
    out_data = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)), np.exp(a.data) / (1.0 + np.exp(a.data)))

    def backward(grad):
        _accumulate(a, grad * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward, "sigmoid")


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), computed stably for large |x|."""
    out_data = np.logaddexp(0.0, a.data)
    sig = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)), np.exp(a.data) / (1.0 + np.exp(a.data)))

    def backward(grad):
        _accumulate(a, grad * sig)

    return _make(out_data, (a,), backward, "softplus")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(grad):
        # dx = y * (g - sum(g * y)) along the softmax axis
        inner = (grad * out_data).sum(axis=axis, keepdims=True)
        _accumulate(a, out_data * (grad - inner))

    return _make(out_data, (a,), backward, "softmax")


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row (last axis) to zero mean and unit variance, then
    apply elementwise gain and bias."""
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normed = centered * inv_std
    out_data = normed * gain.data + bias.data
    n = a.shape[-1]

    def backward(grad):
        _accumulate(gain, _unbroadcast(grad * normed, gain.shape))
        _accumulate(bias, _unbroadcast(grad, bias.shape))
        if a.requires_grad:
            g = grad * gain.data
            # standard layer-norm backward over the last axis
            dx = inv_std * (g - g.mean(axis=-1, keepdims=True) - normed * (g * normed).mean(axis=-1, keepdims=True))
            _accumulate(a, dx)

    return _make(out_data, (a, gain, bias), backward, "layer_norm")


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of an embedding table; backward scatter-adds into it."""
    ids = np.asarray(ids, dtype=np.int64)
    out_data = table.data[ids]

    def backward(grad):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, grad)

    return _make(out_data, (table,), backward, "embedding_lookup")


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def finite_difference_gradient(f: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar-valued closure w.r.t. one tensor."""
    fd = np.zeros_like(param.data)
    flat = param.data.ravel()
    fd_flat = fd.ravel()
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        hi = f().item()
        flat[i] = original - h
        lo = f().item()
        flat[i] = original
        fd_flat[i] = (hi - lo) / (2 * h)
    return fd


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(f: Callable[[], Tensor], params: dict[str, Tensor], h: float = 1e-5) -> dict[str, float]:
    """Compare autodiff gradients of f() against central finite differences.

    Returns the max relative error per parameter tensor.  f must rebuild the
    graph on every call.
    """
    zero_grads(params.values())
    loss = f()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}
    errors = {}
    for name, p in params.items():
        fd = finite_difference_gradient(f, p, h=h)
        errors[name] = max_relative_error(analytic[name], fd)
    return errors
