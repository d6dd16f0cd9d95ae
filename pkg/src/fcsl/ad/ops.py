"""Differentiable primitives.

Every function takes :class:`Tensor` (or array-like constants) and returns a
:class:`Tensor`. Broadcasting follows numpy rules; gradients are summed back
to the input shapes.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, make_result

_SELU_ALPHA = 1.6732632423543772
_SELU_SCALE = 1.0507009873554805


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_result("add", a.data + b.data, (a, b),
                       lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_result("sub", a.data - b.data, (a, b),
                       lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        ga = unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_result("mul", ad * bd, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd

    def backward(g):
        ga = unbroadcast(g / bd, ad.shape) if a.requires_grad else None
        gb = unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_result("div", out, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_result("neg", -a.data, (a,), lambda g: (-g,))


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return make_result("pow", ad ** p, (a,), lambda g: (g * p * ad ** (p - 1),))


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, batched over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    if bd.ndim == 2 and ad.ndim > 2:
        # weight-style product: fold leading axes into one large GEMM
        k, n = bd.shape
        a2 = ad.reshape(-1, k)

        def backward_flat(g):
            g2 = g.reshape(-1, n)
            ga = (g2 @ bd.T).reshape(ad.shape) if a.requires_grad else None
            gb = a2.T @ g2 if b.requires_grad else None
            return ga, gb

        return make_result("matmul", (a2 @ bd).reshape(ad.shape[:-1] + (n,)), (a, b), backward_flat)

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_result("matmul", ad @ bd, (a, b), backward)


# ---------------------------------------------------------------- reductions

def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_result("sum", a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def max(a, axis: int = -1, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Maximum along one axis; the gradient goes to the first maximiser."""
    a = as_tensor(a)
    ad = a.data
    idx = np.expand_dims(np.argmax(ad, axis=axis), axis)
    out = np.take_along_axis(ad, idx, axis=axis)

    def backward(g):
        gfull = np.zeros_like(ad)
        gk = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(gfull, idx, gk, axis=axis)
        return (gfull,)

    return make_result("max", out if keepdims else np.squeeze(out, axis), (a,), backward)


# ---------------------------------------------------------------- shape ops

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return make_result("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return make_result("transpose", np.transpose(a.data, axes), (a,),
                       lambda g: (np.transpose(g, inv),))


def swapaxes(a, i: int, j: int) -> Tensor:
    a = as_tensor(a)
    return make_result("swapaxes", np.swapaxes(a.data, i, j), (a,),
                       lambda g: (np.swapaxes(g, i, j),))


def _has_array_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    fancy = _has_array_index(idx)

    def backward(g):
        gfull = np.zeros(shape)
        if fancy:
            np.add.at(gfull, idx, g)
        else:
            gfull[idx] = g
        return (gfull,)

    return make_result("getitem", a.data[idx], (a,), backward)


def take(a, indices, axis: int) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate in backward."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.intp)
    shape = a.shape
    ax = axis % a.ndim

    def backward(g):
        gfull = np.zeros(shape)
        gm = np.moveaxis(gfull, ax, 0)
        gg = np.moveaxis(g, ax, 0)
        np.add.at(gm, indices, gg)
        return (gfull,)

    return make_result("take", np.take(a.data, indices, axis=ax), (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result("concat", np.concatenate([t.data for t in ts], axis=axis), ts, backward)


def stack(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    n = len(ts)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return make_result("stack", np.stack([t.data for t in ts], axis=axis), ts, backward)


# ---------------------------------------------------------------- elementwise

def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_result("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return make_result("log", np.log(ad), (a,), lambda g: (g / ad,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_result("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return make_result("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return make_result("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)
    return make_result("softplus", out, (a,), lambda g: (g * _sigmoid(x),))


def silu(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    s = _sigmoid(x)
    return make_result("silu", x * s, (a,), lambda g: (g * s * (1.0 + x * (1.0 - s)),))


def selu(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    pos = x > 0
    ex = np.exp(np.minimum(x, 0.0))
    out = _SELU_SCALE * np.where(pos, x, _SELU_ALPHA * (ex - 1.0))
    dx = _SELU_SCALE * np.where(pos, 1.0, _SELU_ALPHA * ex)
    return make_result("selu", out, (a,), lambda g: (g * dx,))


def softmax(a, axis: int = -1) -> Tensor:
    """Softmax with max subtraction along ``axis``."""
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result("softmax", out, (a,), backward)


def softmax_rows(x) -> Tensor:
    """Row-wise softmax of a matrix (last axis)."""
    return softmax(x, axis=-1)


def normalize(a, axis=-1, eps: float = 1e-5) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Zero-mean, unit-variance along ``axis`` (biased variance).

    Returns the normalised tensor together with the batch mean and variance so
    callers can maintain running statistics.
    """
    a = as_tensor(a)
    x = a.data
    mu = x.mean(axis=axis, keepdims=True)
    var = x.var(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv

    def backward(g):
        gm = g.mean(axis=axis, keepdims=True)
        gxm = (g * xhat).mean(axis=axis, keepdims=True)
        return (inv * (g - gm - xhat * gxm),)

    return make_result("normalize", xhat, (a,), backward), mu, var


def layer_norm(a, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis and apply the affine map ``xhat * gamma + beta`` (one node)."""
    a, gamma, beta = as_tensor(a), as_tensor(gamma), as_tensor(beta)
    x = a.data
    d = x.shape[-1]
    xhat = x - x.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(np.einsum("...i,...i->...", xhat, xhat)[..., None] / d + eps)
    xhat *= inv
    gd = gamma.data
    out = xhat * gd
    out += beta.data
    flat = gamma.shape == (d,) and beta.shape == (d,)

    def backward(g):
        gx = None
        if a.requires_grad:
            gh = g * gd
            m2 = np.einsum("...i,...i->...", gh, xhat)[..., None] / d
            gx = gh
            gx -= gh.mean(axis=-1, keepdims=True)
            gx -= xhat * m2
            gx *= inv
        if flat:
            g2, x2 = g.reshape(-1, d), xhat.reshape(-1, d)
            gg = np.einsum("ij,ij->j", g2, x2) if gamma.requires_grad else None
            gb = g2.sum(axis=0) if beta.requires_grad else None
        else:
            gg = unbroadcast(g * xhat, gamma.shape) if gamma.requires_grad else None
            gb = unbroadcast(g, beta.shape) if beta.requires_grad else None
        return gx, gg, gb

    return make_result("layer_norm", out, (a, gamma, beta), backward)


def dropout(a, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    a = as_tensor(a)
    if not training or p <= 0.0:
        return a
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return mul(a, mask)


def straight_through(a, fn) -> Tensor:
    """Forward ``fn(a.data)``; backward passes the gradient unchanged."""
    a = as_tensor(a)
    out = np.asarray(fn(a.data), dtype=np.float64)
    if out.shape != a.shape:
        raise ValueError("straight-through function must preserve shape")
    return make_result("straight_through", out, (a,), lambda g: (g,))


# ---------------------------------------------------------------- fused kernels

def causal_conv1d(x, w, b) -> Tensor:
    """Depthwise causal convolution over the time axis.

    ``x`` is ``(B, T, F)``, ``w`` is ``(F, W)`` and ``b`` is ``(F,)``;
    ``y[:, t, f] = b[f] + sum_k w[f, k] * x[:, t - (W-1) + k, f]`` with zero
    padding before the first step.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    xd, wd = x.data, w.data
    B, T, F = xd.shape
    W = wd.shape[1]
    xp = np.concatenate([np.zeros((B, W - 1, F)), xd], axis=1)
    out = np.broadcast_to(b.data, (B, T, F)).copy()
    for k in range(W):
        out += xp[:, k:k + T, :] * wd[:, k]

    def backward(g):
        gx = np.zeros_like(xp)
        gw = np.empty_like(wd)
        for k in range(W):
            gx[:, k:k + T, :] += g * wd[:, k]
            gw[:, k] = (g * xp[:, k:k + T, :]).sum(axis=(0, 1))
        return gx[:, W - 1:, :], gw, g.sum(axis=(0, 1))

    return make_result("causal_conv1d", out, (x, w, b), backward)


def _zoh_input_gain(ea: np.ndarray, a: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """(exp(delta*a) - 1) / a, continued to delta where a == 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (ea - 1.0) / a
    return np.where(a == 0, delta, r)


def selective_scan(x, delta, a, bmat, cmat) -> Tensor:
    """Input-dependent diagonal state-space scan with zero-order-hold steps.

    Shapes: ``x``, ``delta`` are ``(B, T, F)``; ``a`` is ``(F, N)``; ``bmat``
    and ``cmat`` are ``(B, T, N)``. For every ``(b, f)`` it runs::

        abar_t = exp(delta_t * a_f)
        bbar_t = (abar_t - 1) / a_f * bmat_t
        s_t    = abar_t * s_{t-1} + bbar_t * x_t
        y_t    = cmat_t . s_t

    with ``s_0 = 0``. The backward pass is the adjoint recurrence run in
    reverse time.
    """
    x, delta, a, bmat, cmat = (as_tensor(t) for t in (x, delta, a, bmat, cmat))
    ad = a.data
    B, T, F = x.shape
    N = ad.shape[1]
    # time-major copies so every step works on one contiguous (B, F, N) block
    xt, dt, bt, ct = (np.ascontiguousarray(t.data.transpose(1, 0, 2)) for t in (x, delta, bmat, cmat))
    zero = ad == 0
    has_zero = bool(zero.any())
    with np.errstate(divide="ignore"):
        inv_a = np.where(zero, 0.0, 1.0 / ad)
    states = np.empty((T, B, F, N))
    ea = np.empty((T, B, F, N))
    s = np.zeros((B, F, N))
    tmp = np.empty((B, F, N))
    for t in range(T):
        e = ea[t]
        np.multiply(dt[t][:, :, None], ad, out=e)
        np.exp(e, out=e)
        np.subtract(e, 1.0, out=tmp)
        tmp *= inv_a
        if has_zero:
            tmp[:, zero] = np.broadcast_to(dt[t][:, :, None], tmp.shape)[:, zero]
        tmp *= bt[t][:, None, :]
        tmp *= xt[t][:, :, None]
        st = states[t]
        np.multiply(e, s, out=st)
        st += tmp
        s = st
    y = np.matmul(states, ct[:, :, :, None])[..., 0].transpose(1, 0, 2)

    def backward(g):
        gt = np.ascontiguousarray(g.transpose(1, 0, 2))
        gx = np.empty((T, B, F))
        gdelta = np.empty((T, B, F))
        gb = np.empty((T, B, N))
        ga = np.zeros((F, N))
        ga_gain = np.zeros((F, N))
        gc = np.matmul(gt[:, :, None, :], states)[:, :, 0, :]
        gs = np.zeros((B, F, N))
        t1 = np.empty((B, F, N))
        bx = np.empty((B, F, N))
        for t in range(T - 1, -1, -1):
            if t < T - 1:
                gs *= ea[t + 1]
            gs += gt[t][:, :, None] * ct[t][:, None, :]
            e = ea[t]
            # gradient through the input gain (e - 1) / a (dt where a == 0)
            np.subtract(e, 1.0, out=t1)
            t1 *= inv_a
            if has_zero:
                t1[:, zero] = np.broadcast_to(dt[t][:, :, None], t1.shape)[:, zero]
            t1 *= gs
            gx[t] = np.matmul(t1, bt[t][:, :, None])[..., 0]
            gb[t] = np.matmul(xt[t][:, None, :], t1)[:, 0, :]
            # e = exp(dt*a) feeds both e*s_prev and the gain: d e/d dt = a*e, d e/d a = dt*e
            np.multiply(bt[t][:, None, :], xt[t][:, :, None], out=bx)
            np.multiply(bx, inv_a, out=t1)
            if t > 0:
                t1 += states[t - 1]
            t1 *= gs
            t1 *= e
            gdelta[t] = np.einsum("bfn,fn->bf", t1, ad)
            ga += np.einsum("bfn,bf->fn", t1, dt[t])
            bx *= gs
            if has_zero:
                # at a == 0 the gain is dt: d/d dt = 1, d/d a = dt^2 / 2
                gdelta[t] += np.sum(np.where(zero, bx, 0.0), axis=-1)
                ga += np.where(zero, np.einsum("bfn,bf->fn", bx, dt[t] ** 2) / 2, 0.0)
            # explicit 1/a factor of the gain with e held fixed: -(e - 1) / a^2
            np.subtract(e, 1.0, out=t1)
            t1 *= bx
            ga_gain += t1.sum(axis=0)
        ga -= ga_gain * inv_a * inv_a
        return (gx.transpose(1, 0, 2), gdelta.transpose(1, 0, 2), ga,
                gb.transpose(1, 0, 2), gc.transpose(1, 0, 2))

    return make_result("selective_scan", y, (x, delta, a, bmat, cmat), backward)
