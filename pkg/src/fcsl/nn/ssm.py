"""Reference (non-differentiable) diagonal state-space computations.

These numpy routines define the selective SSM independently of the fused
autodiff kernel. The recurrent and convolutional forms are two evaluations
of the same linear time-varying system and must agree to rounding.

Shapes: inputs ``h (B, T, F)``, step sizes ``d (B, T, F)``, diagonal
``a (F, N)``, input/output projections ``bmat, cmat (B, T, N)``.
"""

from __future__ import annotations

import numpy as np


def s4d_real_init(n_state: int, n_feat: int) -> np.ndarray:
    """Diagonal initialisation ``a_i = -(i + 1)`` for ``i = 1..N``, repeated per feature."""
    return -np.tile(np.arange(2, n_state + 2, dtype=np.float64), (n_feat, 1))


def ssm_discretize(a, b, d):
    """Zero-order-hold discretisation of a diagonal continuous system.

    ``abar = exp(d a)`` and ``bbar = (exp(d a) - 1) / a * b``, with the
    ``a = 0`` limit ``bbar = d b``. Arrays broadcast elementwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    abar = np.exp(d * a)
    # expm1 keeps the small-step gain accurate
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(a == 0, d, np.expm1(d * a) / np.where(a == 0, 1.0, a))
    return abar, gain * b


def discretize_selective(d, a, bmat):
    """Per-step ``(abar, bbar)`` of shape ``(B, T, F, N)``."""
    return ssm_discretize(a[None, None], bmat[:, :, None, :], d[..., None])


def ssm_recurrent(h, abar, bbar, cmat):
    """``s_t = abar_t s_{t-1} + bbar_t h_t``, ``y_t = c_t . s_t``, ``s_0 = 0``."""
    B, T, F = h.shape
    s = np.zeros(abar.shape[:1] + abar.shape[2:])
    y = np.empty((B, T, F))
    for t in range(T):
        s = abar[:, t] * s + bbar[:, t] * h[:, t, :, None]
        y[:, t] = np.einsum("bfn,bn->bf", s, cmat[:, t])
    return y


def ssm_convolutional(h, abar, bbar, cmat):
    """Causal-convolution form ``y_t = sum_{j<=t} c_t . (prod_{k=j+1..t} abar_k) bbar_j h_j``.

    The transition products come from a prefix sum of ``log abar``:
    ``prod_{k=j+1..t} abar_k = exp(P_t - P_j)`` with ``P_t = sum_{k<=t} log abar_k``.
    Requires ``abar > 0``.
    """
    B, T, F = h.shape
    if (abar <= 0).any():
        raise ValueError("prefix-product form needs strictly positive transitions")
    pref = np.cumsum(np.log(abar), axis=1)  # (B, T, F, N)
    mask = np.tril(np.ones((T, T), dtype=bool))
    # kern[b, t, j, f, n] = exp(P_t - P_j) for j <= t
    diff = pref[:, :, None] - pref[:, None, :]
    kern = np.where(mask[None, :, :, None, None], np.exp(np.minimum(diff, 0.0)), 0.0)
    u = bbar * h[..., None]  # (B, T, F, N)
    return np.einsum("btn,btjfn,bjfn->btf", cmat, kern, u, optimize=True)


def ssm_kernel(abar, bbar, c, T: int):
    """Fixed causal kernel ``K_i = c . abar^i bbar`` of a time-invariant system.

    ``abar, bbar`` are ``(F, N)`` and ``c`` is ``(N,)``; returns ``(T, F)``.
    """
    powers = abar[None] ** np.arange(T)[:, None, None]
    return np.einsum("n,ifn,fn->if", c, powers, bbar)


def causal_conv(h, kern):
    """``y_t = sum_{i<=t} K_i h_{t-i}`` per feature; ``h (B, T, F)``, ``kern (T, F)``."""
    B, T, F = h.shape
    y = np.zeros((B, T, F))
    for i in range(T):
        y[:, i:] += kern[i] * h[:, : T - i]
    return y


def selective_params(x, w_b, w_c, w_d, b_d, a):
    """Input-conditioned SSM parameters for ``x (B, T, F)``.

    ``bmat = x w_b``, ``cmat = x w_c`` (``F -> N``), ``d = softplus(x w_d + b_d)``
    where ``x w_d`` is one value per step broadcast over the ``F`` channels.
    Returns ``(abar, bbar, cmat, d)``.
    """
    bmat = x @ w_b
    cmat = x @ w_c
    z = x @ w_d.reshape(-1, 1) + b_d
    d = np.logaddexp(0.0, z)
    abar, bbar = discretize_selective(d, a, bmat)
    return abar, bbar, cmat, d
