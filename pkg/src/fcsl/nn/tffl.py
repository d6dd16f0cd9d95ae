"""Square-expansion feed-forward layer that mixes a matrix and its transpose."""

from __future__ import annotations

import numpy as np

from .. import ad
from ..ad import ops
from .layers import Block, Linear


class TFFL(Block):
    """Feed-forward layer on ``(B, 2N_d, d_h)`` inputs.

    The input is first mapped to a square ``2N_d x 2N_d`` matrix ``S``. Both
    ``S`` and ``S^T`` are projected to ``d_f/2`` features, concatenated,
    passed through ReLU and dropout and mapped back to ``d_h``. Mixing the
    transpose lets the delay axis and the angle axis exchange information.
    """

    def __init__(self, params, prefix, n_d: int, d_h: int, d_f: int, rng, p_drop: float = 0.1):
        super().__init__(params, prefix)
        if d_f % 2:
            raise ValueError(f"d_f={d_f} must be even")
        n2 = 2 * n_d
        self.p_drop = p_drop
        self.g1 = Linear(params, f"{prefix}.g1", d_h, n2, rng)
        self.g2 = Linear(params, f"{prefix}.g2", n2, d_f // 2, rng)
        self.g3 = Linear(params, f"{prefix}.g3", n2, d_f // 2, rng)
        self.g4 = Linear(params, f"{prefix}.g4", d_f, d_h, rng)

    def __call__(self, x, training: bool = False, rng: np.random.Generator | None = None):
        s = self.g1(x)
        sc = ad.concat([self.g2(s), self.g3(ops.swapaxes(s, -1, -2))], axis=-1)
        h = ad.dropout(ad.relu(sc), self.p_drop, rng, training)
        return self.g4(h)
