"""Mamba layer and block built on the fused selective scan."""

from __future__ import annotations

import numpy as np

from .. import ad
from ..ad import init_uniform, ops
from .layers import Block, FeedForward, LayerNorm, Linear
from .ssm import s4d_real_init


def _dt_bias(rng, n: int, lo: float = 1e-3, hi: float = 1e-1) -> np.ndarray:
    """Bias whose softplus is log-uniform in ``[lo, hi]``."""
    dt = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    return dt + np.log(-np.expm1(-dt))


class MambaLayer(Block):
    """Selective-SSM layer on ``(B, T, D)`` sequences.

    ``x, z = split(in_proj(u))``; ``x`` goes through a causal depthwise
    convolution and SiLU, then the selective scan whose ``B``, ``C`` and step
    size are linear functions of ``x``; the result is gated by ``SiLU(z)`` and
    projected back to ``D``.
    """

    def __init__(self, params, prefix, d_model: int, d_inner: int, n_state: int, rng, conv_width: int = 4):
        super().__init__(params, prefix)
        self.d_inner = d_inner
        self.in_proj = Linear(params, f"{prefix}.in_proj", d_model, 2 * d_inner, rng, bias=False)
        self.add("conv_w", init_uniform(rng, (d_inner, conv_width), conv_width))
        self.add("conv_b", np.zeros(d_inner))
        self.add("w_b", init_uniform(rng, (d_inner, n_state), d_inner))
        self.add("w_c", init_uniform(rng, (d_inner, n_state), d_inner))
        self.add("w_d", init_uniform(rng, (d_inner, 1), d_inner))
        self.add("b_d", _dt_bias(rng, d_inner))
        self.add("a_log", np.log(-s4d_real_init(n_state, d_inner)))
        self.out_proj = Linear(params, f"{prefix}.out_proj", d_inner, d_model, rng, bias=False)

    def a(self):
        return -ad.exp(self.p("a_log"))

    def step_sizes(self, x):
        return ad.softplus(ops.matmul(x, self.p("w_d")) + self.p("b_d"))

    def __call__(self, u):
        xz = self.in_proj(u)
        x = xz[..., : self.d_inner]
        z = xz[..., self.d_inner:]
        x = ad.silu(ops.causal_conv1d(x, self.p("conv_w"), self.p("conv_b")))
        bmat = ops.matmul(x, self.p("w_b"))
        cmat = ops.matmul(x, self.p("w_c"))
        y = ops.selective_scan(x, self.step_sizes(x), self.a(), bmat, cmat)
        return self.out_proj(y * ad.silu(z))


class MambaBlock(Block):
    """Pre-norm residual block: ``x + Mamba(LN(x))`` then ``x + FFL(LN(x))``."""

    def __init__(self, params, prefix, d_model: int, d_inner: int, n_state: int, rng, ffl_hidden: int | None = None):
        super().__init__(params, prefix)
        self.ln1 = LayerNorm(params, f"{prefix}.ln1", d_model)
        self.mamba = MambaLayer(params, f"{prefix}.mamba", d_model, d_inner, n_state, rng)
        self.ln2 = LayerNorm(params, f"{prefix}.ln2", d_model)
        self.ffl = FeedForward(params, f"{prefix}.ffl", d_model, ffl_hidden or 2 * d_model, rng)

    def __call__(self, x):
        x = x + self.mamba(self.ln1(x))
        return x + self.ffl(self.ln2(x))
