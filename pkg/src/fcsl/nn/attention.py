"""Multi-head scaled dot-product self-attention."""

from __future__ import annotations

import numpy as np

from .. import ad
from ..ad import init_uniform, ops
from .layers import Block


class MultiHeadAttention(Block):
    """Self-attention over ``(B, T, d_model)`` inputs.

    Head ``i`` owns ``wq.i``, ``wk.i`` (``d_model x d_k``) and ``wv.i``
    (``d_model x d_v``) with ``d_k = d_v = d_model / n_heads``; the
    concatenated heads pass through the shared ``wo``. No biases.
    """

    def __init__(self, params, prefix, d_model: int, n_heads: int, rng, causal: bool = False):
        super().__init__(params, prefix)
        if d_model % n_heads:
            raise ValueError(f"{n_heads} heads do not divide d_model={d_model}")
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        self.causal = causal
        for i in range(n_heads):
            for w in ("wq", "wk", "wv"):
                self.add(f"{w}.{i}", init_uniform(rng, (d_model, self.d_k), d_model))
        self.add("wo", init_uniform(rng, (d_model, d_model), d_model))

    def weights(self, x, i: int):
        """Attention matrix of head ``i``, shape ``(B, T, T)``."""
        q = ops.matmul(x, self.p(f"wq.{i}"))
        k = ops.matmul(x, self.p(f"wk.{i}"))
        logits = ops.matmul(q, ops.swapaxes(k, -1, -2)) * (1.0 / np.sqrt(self.d_k))
        if self.causal:
            t = logits.shape[-1]
            logits = logits + np.triu(np.full((t, t), -1e30), 1)
        return ad.softmax(logits, axis=-1)

    def __call__(self, x):
        x = ad.as_tensor(x)
        heads = [ops.matmul(self.weights(x, i), ops.matmul(x, self.p(f"wv.{i}")))
                 for i in range(self.n_heads)]
        h = heads[0] if len(heads) == 1 else ad.concat(heads, axis=-1)
        return ops.matmul(h, self.p("wo"))
