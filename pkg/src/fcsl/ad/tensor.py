"""Dense float64 tensors with tape-based reverse-mode differentiation.

A :class:`Tensor` wraps a row-major ``float64`` ndarray. Operations executed
while a :class:`Tape` is active and touching at least one tensor with
``requires_grad`` are appended to that tape in execution order, which is a
valid topological order by construction. :meth:`Tape.backward` walks the
recorded nodes in exact reverse order.

A tape can be consumed once. Calling ``backward`` a second time without a
fresh forward pass raises ``RuntimeError``.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

_local = threading.local()


def _stack() -> list:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def active_tape() -> "Tape | None":
    st = _stack()
    return st[-1] if st else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "is_leaf", "name", "__weakref__")

    # make ndarray defer to our reflected operators
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.is_leaf = True
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; implementations live in ops.py
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from . import ops
        return ops.matmul(other, self)

    def __pow__(self, p):
        from . import ops
        return ops.power(self, p)

    def __getitem__(self, idx):
        from . import ops
        return ops.getitem(self, idx)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def swapaxes(self, a: int, b: int):
        from . import ops
        return ops.swapaxes(self, a, b)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Node:
    __slots__ = ("inputs", "out", "backward", "op")

    def __init__(self, op: str, inputs: Sequence[Tensor], out: Tensor, backward: Callable):
        self.op = op
        self.inputs = tuple(inputs)
        self.out = out
        self.backward = backward


class Tape:
    """Records differentiable operations for one forward pass.

    Use as a context manager; nested tapes are allowed and the innermost one
    records. Not shared across threads.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        st = _stack()
        if st and st[-1] is self:
            st.pop()

    def record(self, node: Node) -> None:
        if self.consumed:
            raise RuntimeError("cannot record on a tape that has already run backward")
        self.nodes.append(node)

    def backward(self, loss: Tensor, grad: np.ndarray | None = None) -> None:
        if self.consumed:
            raise RuntimeError("tape already consumed by backward(); re-run the forward pass")
        if not loss.requires_grad:
            raise ValueError("loss does not depend on any tensor requiring grad")
        seed = np.ones_like(loss.data) if grad is None else np.asarray(grad, dtype=np.float64)
        if seed.shape != loss.shape:
            raise ValueError(f"seed gradient shape {seed.shape} != loss shape {loss.shape}")
        pending: dict[int, np.ndarray] = {}
        if loss.is_leaf:
            _accumulate_leaf(loss, seed)
        else:
            pending[id(loss)] = seed
        for node in reversed(self.nodes):
            g = pending.pop(id(node.out), None)
            if g is None:
                continue
            in_grads = node.backward(g)
            for t, gi in zip(node.inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                if gi.shape != t.shape:
                    raise AssertionError(f"{node.op}: grad shape {gi.shape} for input {t.shape}")
                if t.is_leaf:
                    _accumulate_leaf(t, gi)
                else:
                    key = id(t)
                    prev = pending.get(key)
                    pending[key] = gi if prev is None else prev + gi
        self.consumed = True
        self.nodes = []


def _accumulate_leaf(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def make_result(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    """Wrap ``data`` as an op output and record it if any input needs grad."""
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.is_leaf = False
        tape.record(Node(op, inputs, out, backward))
    return out
