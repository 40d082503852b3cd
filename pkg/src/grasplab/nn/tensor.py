"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; calling
``backward()`` on a scalar result walks the recorded graph once in
reverse topological order and accumulates gradients into every tensor
created with ``requires_grad=True``. Graphs are built per forward pass
and thrown away; there is no taping across calls and no higher-order
differentiation.

Dtype discipline: operations inherit the operand dtypes (python scalars
are cast to the tensor's dtype, so float32 graphs stay float32). Training
runs in single precision; gradient verification builds the same graphs in
double precision.

Broadcasting follows numpy rules; backward sums gradients over the
broadcast axes so parameter shapes always match their gradients.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from grasplab import accel
from grasplab.errors import ShapeMismatch


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcast to produce it."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    """An ndarray plus the closure that routes gradients to its parents."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False) -> None:
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    # -- construction helpers -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def _wrap(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def _make(self, data: np.ndarray, parents: tuple["Tensor", ...]) -> "Tensor":
        out = Tensor(data)
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
        return out

    def _accum(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += _unbroadcast(g, self.data.shape)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        o = self._wrap(other)
        out = self._make(self.data + o.data, (self, o))
        if out.requires_grad:

            def back() -> None:
                self._accum(out.grad)
                o._accum(out.grad)

            out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        out = self._make(-self.data, (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(-out.grad)
        return out

    def __sub__(self, other) -> "Tensor":
        return self + (-self._wrap(other))

    def __rsub__(self, other) -> "Tensor":
        return (-self) + other

    def __mul__(self, other) -> "Tensor":
        o = self._wrap(other)
        out = self._make(self.data * o.data, (self, o))
        if out.requires_grad:

            def back() -> None:
                self._accum(out.grad * o.data)
                o._accum(out.grad * self.data)

            out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        o = self._wrap(other)
        out = self._make(self.data / o.data, (self, o))
        if out.requires_grad:

            def back() -> None:
                self._accum(out.grad / o.data)
                o._accum(-out.grad * self.data / (o.data * o.data))

            out._backward = back
        return out

    def __pow__(self, exponent: float) -> "Tensor":
        e = float(exponent)
        out = self._make(self.data**e, (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(
                out.grad * e * self.data ** (e - 1.0)
            )
        return out

    def __matmul__(self, other) -> "Tensor":
        o = self._wrap(other)
        out = self._make(self.data @ o.data, (self, o))
        if out.requires_grad:

            def back() -> None:
                self._accum(out.grad @ o.data.T)
                o._accum(self.data.T @ out.grad)

            out._backward = back
        return out

    # -- elementwise nonlinearities -------------------------------------------

    def exp(self) -> "Tensor":
        y = np.exp(self.data)
        out = self._make(y, (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(out.grad * y)
        return out

    def log(self) -> "Tensor":
        out = self._make(np.log(self.data), (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(out.grad / self.data)
        return out

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)
        out = self._make(y, (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(out.grad * (1.0 - y * y))
        return out

    def relu(self) -> "Tensor":
        mask = self.data > 0.0
        out = self._make(np.where(mask, self.data, 0.0), (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(out.grad * mask)
        return out

    def minimum(self, other) -> "Tensor":
        """Elementwise min; ties send the gradient to self."""
        o = self._wrap(other)
        take_self = self.data <= o.data
        out = self._make(np.where(take_self, self.data, o.data), (self, o))
        if out.requires_grad:

            def back() -> None:
                self._accum(out.grad * take_self)
                o._accum(out.grad * ~take_self)

            out._backward = back
        return out

    def clip(self, lo: float, hi: float) -> "Tensor":
        """Clamp to [lo, hi]; gradient passes only where unclamped or on the edge."""
        inside = (self.data >= lo) & (self.data <= hi)
        out = self._make(np.clip(self.data, lo, hi), (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(out.grad * inside)
        return out

    # -- reductions and shape -----------------------------------------------

    def sum(self, axis: int | tuple | None = None, keepdims: bool = False) -> "Tensor":
        out = self._make(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out.requires_grad:

            def back() -> None:
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accum(np.broadcast_to(g, self.data.shape))

            out._backward = back
        return out

    def mean(self, axis: int | tuple | None = None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
        )
        scale = np.asarray(1.0 / float(n), dtype=self.data.dtype)
        return self.sum(axis=axis, keepdims=keepdims) * scale

    def reshape(self, *shape: int) -> "Tensor":
        out = self._make(self.data.reshape(*shape), (self,))
        if out.requires_grad:
            out._backward = lambda: self._accum(out.grad.reshape(self.data.shape))
        return out

    def flatten_batch(self) -> "Tensor":
        """(B, ...) -> (B, -1)."""
        return self.reshape(self.data.shape[0], -1)

    def concat_cols(self, other: "Tensor") -> "Tensor":
        """Join two (B, n) tensors side by side into (B, n + m)."""
        o = self._wrap(other)
        if self.data.ndim != 2 or o.data.ndim != 2:
            raise ShapeMismatch("concat_cols wants two 2d tensors")
        split = self.data.shape[1]
        out = self._make(np.concatenate([self.data, o.data], axis=1), (self, o))
        if out.requires_grad:

            def back() -> None:
                self._accum(out.grad[:, :split])
                o._accum(out.grad[:, split:])

            out._backward = back
        return out

    # -- conv2d ----------------------------------------------------------------

    def conv2d(self, weight: "Tensor", bias: "Tensor", stride: int) -> "Tensor":
        """Valid-padding strided conv: self (B,C,H,W) with weight (F,C,k,k)."""
        x, w, b = self, weight, bias
        if x.data.ndim != 4 or w.data.ndim != 4 or x.data.shape[1] != w.data.shape[1]:
            raise ShapeMismatch(
                f"conv2d: input {x.data.shape} incompatible with weight {w.data.shape}"
            )
        if x.data.shape[2] < w.data.shape[2] or x.data.shape[3] < w.data.shape[3]:
            raise ShapeMismatch("conv2d: kernel larger than input")
        y = accel.conv2d_forward(
            np.ascontiguousarray(x.data),
            np.ascontiguousarray(w.data),
            b.data,
            stride,
            stride,
        )
        out = self._make(y, (x, w, b))
        if out.requires_grad:

            def back() -> None:
                gx, gw, gb = accel.conv2d_backward(
                    np.ascontiguousarray(x.data),
                    np.ascontiguousarray(w.data),
                    np.ascontiguousarray(out.grad),
                    stride,
                    stride,
                )
                x._accum(gx)
                w._accum(gw)
                b._accum(gb)

            out._backward = back
        return out

    # -- graph traversal ----------------------------------------------------

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every requires_grad leaf.

        With no argument, self must be a scalar (seeded with 1); an
        explicit ``grad`` array turns this into a vector-Jacobian product.
        """
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without grad needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.data.shape)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward()


def parameter(data: np.ndarray) -> Tensor:
    """A leaf tensor that collects gradients."""
    return Tensor(np.asarray(data), requires_grad=True)
