"""Parameterised building blocks shared by every network.

Each block registers its tensors in a :class:`~fcsl.ad.ParamStore` under
``prefix + "." + local_name`` at construction and reads them back on every
call, so the store is the single source of truth for saving and loading.
"""

from __future__ import annotations

import numpy as np

from .. import ad
from ..ad import ParamStore, Tensor, init_uniform, ops


class Block:
    def __init__(self, params: ParamStore, prefix: str):
        self.params = params
        self.prefix = prefix

    def add(self, local: str, value, trainable: bool = True) -> Tensor:
        return self.params.add(f"{self.prefix}.{local}", value, trainable)

    def p(self, local: str) -> Tensor:
        return self.params[f"{self.prefix}.{local}"]


class Linear(Block):
    """``y = x W + b`` over the last axis, ``W`` of shape ``(d_in, d_out)``."""

    def __init__(self, params, prefix, d_in: int, d_out: int, rng, bias: bool = True, scale: float = 1.0):
        super().__init__(params, prefix)
        self.bias = bias
        self.add("w", scale * init_uniform(rng, (d_in, d_out), d_in))
        if bias:
            self.add("b", np.zeros(d_out))

    def __call__(self, x):
        y = ops.matmul(x, self.p("w"))
        return y + self.p("b") if self.bias else y


class LayerNorm(Block):
    def __init__(self, params, prefix, d: int, eps: float = 1e-5):
        super().__init__(params, prefix)
        self.eps = eps
        self.add("gamma", np.ones(d))
        self.add("beta", np.zeros(d))

    def __call__(self, x):
        return ad.layer_norm(x, self.p("gamma"), self.p("beta"), self.eps)


class BatchNorm(Block):
    """Feature normalisation over all leading axes with running statistics.

    Training mode normalises with the batch statistics and updates the running
    mean/variance (stored as non-trainable parameters); eval mode uses the
    frozen running statistics.
    """

    def __init__(self, params, prefix, d: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__(params, prefix)
        self.momentum = momentum
        self.eps = eps
        self.add("gamma", np.ones(d))
        self.add("beta", np.zeros(d))
        self.add("running_mean", np.zeros(d), trainable=False)
        self.add("running_var", np.ones(d), trainable=False)

    def __call__(self, x, training: bool):
        x = ad.as_tensor(x)
        if training:
            axes = tuple(range(x.ndim - 1))
            xhat, mu, var = ad.normalize(x, axis=axes, eps=self.eps)
            m = self.momentum
            rm, rv = self.p("running_mean"), self.p("running_var")
            n = int(np.prod([x.shape[a] for a in axes]))
            rm.data[...] = (1 - m) * rm.data + m * mu.reshape(-1)
            rv.data[...] = (1 - m) * rv.data + m * var.reshape(-1) * n / max(n - 1, 1)
        else:
            inv = 1.0 / np.sqrt(self.p("running_var").data + self.eps)
            xhat = (x - self.p("running_mean").data) * inv
        return xhat * self.p("gamma") + self.p("beta")


class FeedForward(Block):
    """Two-layer ReLU feed-forward map ``d -> hidden -> d``."""

    def __init__(self, params, prefix, d: int, hidden: int, rng):
        super().__init__(params, prefix)
        self.fc1 = Linear(params, f"{prefix}.fc1", d, hidden, rng)
        self.fc2 = Linear(params, f"{prefix}.fc2", hidden, d, rng)

    def __call__(self, x):
        return self.fc2(ad.relu(self.fc1(x)))
