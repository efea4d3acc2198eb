"""Reverse-mode automatic differentiation over dense float64 arrays.

A small tape engine in the micrograd style, but array-valued: every
:class:`Tensor` wraps a numpy array, remembers its parents and a backward
closure, and ``backward()`` walks the recorded graph in reverse topological
order. Gradients accumulate in leaf tensors (parameters and inputs);
gradients of intermediate nodes are reset at the start of every
``backward()`` call, so calling backward twice without ``zero_grad()``
exactly doubles the leaf gradients.

Supported broadcasting is deliberately narrow: elementwise ops align
trailing axes numpy-style and the backward pass sums gradients over the
broadcast axes. That covers bias adds, per-row scaling and scalar mixing,
which is all the model needs.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(ValueError):
    """An operation was called outside its contract (e.g. backward on a non-scalar)."""


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # collapse leading axes added by broadcasting
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function without overflow for large |x|."""
    return 1.0 / (1.0 + np.exp(-np.clip(x, -709.0, 709.0)))


class Tensor:
    """A node in the autodiff graph wrapping a float64 numpy array."""

    __slots__ = ("data", "grad", "name", "_backward", "_parents")

    def __init__(self, data, _parents: tuple = (), name: str | None = None):
        self.data = _as_array(data)
        self.grad = np.zeros_like(self.data)
        self.name = name
        self._backward = None
        self._parents = _parents

    # ------------------------------------------------------------------
    # bookkeeping

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # ------------------------------------------------------------------
    # graph construction helpers

    @staticmethod
    def _lift(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def _make(self, data: np.ndarray, parents: tuple, backward) -> "Tensor":
        out = Tensor(data, _parents=parents)
        out._backward = backward
        return out

    # ------------------------------------------------------------------
    # elementwise arithmetic (broadcasting, gradients unbroadcast)

    def __add__(self, other) -> "Tensor":
        other = self._lift(other)
        out_data = self.data + other.data
        out = self._make(out_data, (self, other), None)

        def backward():
            self.grad += _unbroadcast(out.grad, self.data.shape)
            other.grad += _unbroadcast(out.grad, other.data.shape)

        out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        out = self._make(-self.data, (self,), None)

        def backward():
            self.grad += -out.grad

        out._backward = backward
        return out

    def __sub__(self, other) -> "Tensor":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Tensor":
        return self._lift(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = self._lift(other)
        out = self._make(self.data * other.data, (self, other), None)

        def backward():
            self.grad += _unbroadcast(out.grad * other.data, self.data.shape)
            other.grad += _unbroadcast(out.grad * self.data, other.data.shape)

        out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = self._lift(other)
        out = self._make(self.data / other.data, (self, other), None)

        def backward():
            self.grad += _unbroadcast(out.grad / other.data, self.data.shape)
            other.grad += _unbroadcast(
                -out.grad * self.data / (other.data * other.data), other.data.shape
            )

        out._backward = backward
        return out

    def __rtruediv__(self, other) -> "Tensor":
        return self._lift(other) / self

    def __pow__(self, exponent) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise ContractError("only scalar exponents are supported")
        out = self._make(self.data**exponent, (self,), None)

        def backward():
            self.grad += out.grad * exponent * self.data ** (exponent - 1)

        out._backward = backward
        return out

    # ------------------------------------------------------------------
    # linear algebra

    def __matmul__(self, other) -> "Tensor":
        other = self._lift(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError(
                f"matmul expects 2-D operands, got {self.data.shape} @ {other.data.shape}"
            )
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeError(
                f"matmul inner dimensions differ: {self.data.shape} @ {other.data.shape}"
            )
        out = self._make(self.data @ other.data, (self, other), None)

        def backward():
            self.grad += out.grad @ other.data.T
            other.grad += self.data.T @ out.grad

        out._backward = backward
        return out

    def __getitem__(self, key) -> "Tensor":
        out = self._make(self.data[key], (self,), None)

        def backward():
            np.add.at(self.grad, key, out.grad)

        out._backward = backward
        return out

    # ------------------------------------------------------------------
    # reductions

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = self._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), None)

        def backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.grad += np.broadcast_to(g, self.data.shape)

        out._backward = backward
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # ------------------------------------------------------------------
    # nonlinearities

    def sigmoid(self) -> "Tensor":
        y = stable_sigmoid(self.data)
        out = self._make(y, (self,), None)

        def backward():
            self.grad += out.grad * y * (1.0 - y)

        out._backward = backward
        return out

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)
        out = self._make(y, (self,), None)

        def backward():
            self.grad += out.grad * (1.0 - y * y)

        out._backward = backward
        return out

    def softplus(self) -> "Tensor":
        # log(1 + exp(x)), computed stably; derivative is the logistic function
        out = self._make(np.logaddexp(0.0, self.data), (self,), None)

        def backward():
            self.grad += out.grad * stable_sigmoid(self.data)

        out._backward = backward
        return out

    def relu(self) -> "Tensor":
        out = self._make(np.maximum(0.0, self.data), (self,), None)

        def backward():
            self.grad += out.grad * (self.data > 0.0)

        out._backward = backward
        return out

    def log(self) -> "Tensor":
        out = self._make(np.log(self.data), (self,), None)

        def backward():
            self.grad += out.grad / self.data

        out._backward = backward
        return out

    # ------------------------------------------------------------------
    # backward pass

    def backward(self) -> None:
        """Populate gradients of every node reachable from this scalar."""
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar loss, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        # reset intermediate gradients so repeated backward calls stay linear
        for node in topo:
            if node._parents:
                node.grad = np.zeros_like(node.data)
        self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()


class Parameter(Tensor):
    """A named leaf tensor trained by gradient descent."""

    def __init__(self, data, name: str):
        super().__init__(data, name=name)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate tensors along `axis`; gradient slices back to the parents."""
    parts = [Tensor._lift(t) for t in tensors]
    data = np.concatenate([p.data for p in parts], axis=axis)
    out = Tensor(data, _parents=tuple(parts))

    def backward():
        offset = 0
        for p in parts:
            width = p.data.shape[axis]
            index = [slice(None)] * data.ndim
            index[axis] = slice(offset, offset + width)
            p.grad += out.grad[tuple(index)]
            offset += width

    out._backward = backward
    return out


def softmax(logits: Tensor, axis: int = 1) -> Tensor:
    """Row-wise softmax with max-subtraction for stability."""
    logits = Tensor._lift(logits)
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    y = exps / exps.sum(axis=axis, keepdims=True)
    out = Tensor(y, _parents=(logits,))

    def backward():
        g = out.grad
        inner = (g * y).sum(axis=axis, keepdims=True)
        logits.grad += y * (g - inner)

    out._backward = backward
    return out


def maximum_zero(x: Tensor) -> Tensor:
    """Hinge max(0, x); alias kept for readability at call sites."""
    return Tensor._lift(x).relu()


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()
