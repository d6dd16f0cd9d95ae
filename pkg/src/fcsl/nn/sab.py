"""Spatial-frequency attention: a sigmoid gate over the antenna plane."""

from __future__ import annotations

import numpy as np

from .. import ad
from ..ad import init_uniform, ops
from .layers import Block, FeedForward, LayerNorm


class SpatialAttentionLayer(Block):
    """Gate ``(B, N_Rx, N_Tx, d_f)`` features by ``sigmoid(w0*avg + w1*max + b)``.

    ``avg`` and ``max`` pool the feature axis, so the gate is one value per
    (rx, tx) antenna pair. The two weights and the bias form a 1x1
    convolution from two input maps to one.
    """

    def __init__(self, params, prefix, rng):
        super().__init__(params, prefix)
        self.add("conv_w", init_uniform(rng, (2,), 2))
        self.add("conv_b", np.zeros(1))

    def gate(self, x):
        avg = ops.mean(x, axis=-1, keepdims=True)
        mx = ops.max(x, axis=-1, keepdims=True)
        w = self.p("conv_w")
        return ad.sigmoid(avg * w[0] + mx * w[1] + self.p("conv_b"))

    def __call__(self, x):
        return self.gate(x) * x


class SAB(Block):
    """Pre-norm residual block: ``x + SAL(LN(x))`` then ``x + FFL(LN(x))``."""

    def __init__(self, params, prefix, d_f: int, rng, hidden: int | None = None):
        super().__init__(params, prefix)
        self.ln1 = LayerNorm(params, f"{prefix}.ln1", d_f)
        self.sal = SpatialAttentionLayer(params, f"{prefix}.sal", rng)
        self.ln2 = LayerNorm(params, f"{prefix}.ln2", d_f)
        self.ffl = FeedForward(params, f"{prefix}.ffl", d_f, hidden or d_f, rng)

    def __call__(self, x):
        x = x + self.sal(self.ln1(x))
        return x + self.ffl(self.ln2(x))
