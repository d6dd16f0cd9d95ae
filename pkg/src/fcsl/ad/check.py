"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tape, Tensor


def _eval(f: Callable[[Tensor], Tensor], x: Tensor) -> float:
    val = f(x)
    v = float(np.asarray(val.data).reshape(-1)[0]) if val.size == 1 else None
    if v is None:
        raise ValueError(f"function must return a scalar, got shape {val.shape}")
    if not np.isfinite(v):
        raise FloatingPointError(f"non-finite function value {v}")
    return v


def numeric_grad(f, x: Tensor, eps: float = 1e-5, coords=None) -> np.ndarray:
    flat = x.data.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    g = np.zeros(flat.size)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        fp = _eval(f, x)
        flat[i] = orig - eps
        fm = _eval(f, x)
        flat[i] = orig
        g[i] = (fp - fm) / (2.0 * eps)
    return g.reshape(x.shape)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5,
               max_coords: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Max relative error between the tape gradient and central differences.

    The error per coordinate is ``|analytic - numeric| / max(1, |numeric|)``.
    ``max_coords`` limits the check to a random subset of coordinates.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError(f"eps must lie in [1e-6, 1e-4], got {eps}")
    x.requires_grad = True
    x.grad = None
    with Tape() as tape:
        y = f(x)
    if y.size != 1:
        raise ValueError(f"function must return a scalar, got shape {y.shape}")
    if not np.isfinite(y.data).all():
        raise FloatingPointError("non-finite function value")
    if y.requires_grad:
        tape.backward(y)
    analytic = np.zeros(x.shape) if x.grad is None else x.grad.copy()
    coords = None
    if max_coords is not None and x.size > max_coords:
        rng = rng or np.random.default_rng(0)
        coords = rng.choice(x.size, size=max_coords, replace=False)
    numeric = numeric_grad(f, x, eps, coords)
    a = analytic.reshape(-1)
    n = numeric.reshape(-1)
    sel = np.arange(a.size) if coords is None else coords
    if sel.size == 0:
        return 0.0
    return float(np.max(np.abs(a[sel] - n[sel]) / np.maximum(1.0, np.abs(n[sel]))))
