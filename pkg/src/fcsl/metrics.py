"""Evaluation metrics: NMSE, cosine similarity, EZF spectral efficiency, spatial autocorrelation."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

NMSE_FLOOR_DB = -100.0


def _real(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    return np.stack([x.real, x.imag], axis=-1) if np.iscomplexobj(x) else x


def nmse_db(h_hat: np.ndarray, h: np.ndarray) -> float:
    """``10 log10(E||h_hat - h||^2 / E||h||^2)`` with the expectation over the leading axis.

    A perfect estimate is reported as -100 dB.
    """
    h_hat, h = np.asarray(h_hat), np.asarray(h)
    if h_hat.shape != h.shape:
        raise ValueError(f"shape mismatch {h_hat.shape} vs {h.shape}")
    den = np.sum(np.abs(h) ** 2)
    if den <= 0:
        raise ValueError("ground truth has zero energy")
    num = np.sum(np.abs(h_hat - h) ** 2)
    if num <= den * 10 ** (NMSE_FLOOR_DB / 10):
        return NMSE_FLOOR_DB
    return float(10 * np.log10(num / den))


def cosine_similarity(h_hat: np.ndarray, h: np.ndarray) -> float:
    """Mean over samples (leading axis) of the real-inner-product cosine.

    Samples where either tensor has zero norm are dropped with a warning.
    """
    a = _real(h_hat).reshape(np.shape(h_hat)[0], -1)
    b = _real(h).reshape(np.shape(h)[0], -1)
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    ok = (na > 0) & (nb > 0)
    if not ok.all():
        log.warning("cosine similarity: %d zero-norm samples excluded", int((~ok).sum()))
    if not ok.any():
        return float("nan")
    return float(np.mean(np.sum(a[ok] * b[ok], axis=1) / (na[ok] * nb[ok])))


def _zf(g: np.ndarray, cond_limit: float = 1e8) -> np.ndarray:
    """Column-normalized pseudo-inverse of stacked effective rows ``g (F, U, N_Tx)``."""
    gram = g @ np.swapaxes(g.conj(), -1, -2)
    n_ue = gram.shape[-1]
    c = np.linalg.cond(gram)
    bad = ~np.isfinite(c) | (c > cond_limit)
    if bad.any():
        log.info("EZF: %d ill-conditioned UE stacks (worst cond %.3g), regularizing",
                 int(bad.sum()), float(np.nanmax(np.where(np.isfinite(c), c, np.inf))))
        load = 1e-6 * np.trace(gram, axis1=-2, axis2=-1).real / n_ue
        gram = gram + np.where(bad, load, 0.0)[:, None, None] * np.eye(n_ue)
    p = np.swapaxes(g.conj(), -1, -2) @ np.linalg.inv(gram)
    return p / np.maximum(np.linalg.norm(p, axis=-2, keepdims=True), 1e-300)


def ezf_spectral_efficiency(h_hat: np.ndarray, h: np.ndarray, snr_db: float) -> float:
    """Eigen zero-forcing sum rate in bits/s/Hz.

    ``h_hat`` and ``h`` are ``(U, F, N_Tx, N_Rx)``: per UE, ``F`` resource
    elements (slots times subcarriers) of ``N_Tx x N_Rx`` channels; the UE
    receives ``H^T x``. On every element each UE's effective row is its
    dominant left singular vector scaled by the singular value, the rows are
    zero-forced with unit-norm precoder columns, and every UE gets power
    ``snr / U`` against unit noise. SINR uses the true channels with MMSE
    combining at the UE, so residual inter-UE leakage counts as interference.
    Returns the mean over elements of the sum over UEs of ``log2(1 + SINR)``.
    """
    h_hat, h = np.asarray(h_hat), np.asarray(h)
    if h_hat.shape != h.shape or h.ndim != 4:
        raise ValueError(f"expected matching (U, F, N_Tx, N_Rx) arrays, got {h_hat.shape} and {h.shape}")
    n_ue, n_f, _, n_rx = h.shape
    if n_ue < 1:
        raise ValueError("need at least one UE")
    rho = 10 ** (snr_db / 10) / n_ue
    u, s, _ = np.linalg.svd(h_hat)
    g = (u[..., :, 0] * s[..., :1]).transpose(1, 0, 2)  # (F, U, N_Tx)
    p = _zf(g)  # (F, N_Tx, U)
    total = np.zeros(n_f)
    for k in range(n_ue):
        eff = np.swapaxes(h[k], -1, -2) @ p  # (F, N_Rx, U): UE k's view of every stream
        sig = eff[..., k]
        others = np.delete(eff, k, axis=-1)
        cov = np.eye(n_rx) + rho * others @ np.swapaxes(others.conj(), -1, -2)
        sinr = rho * np.real(np.sum(sig.conj() * np.linalg.solve(cov, sig[..., None])[..., 0], axis=-1))
        total += np.log2(1 + np.maximum(sinr, 0.0))
    return float(total.mean())


def spatial_autocorrelation(h: np.ndarray, end: str = "BS") -> np.ndarray:
    """Normalized inner product between antenna-shifted rows (BS) or columns (UE).

    ``h (..., N_Tx, N_Rx)``; the expectation runs over every leading index and
    every start antenna. Returns the complex ``R(x)`` for ``x = 0 .. count-1``.
    Pairs involving a zero vector are skipped.
    """
    h = np.asarray(h)
    if end == "BS":
        v = h  # rows: BS antennas, vectors over UE antennas
    elif end == "UE":
        v = np.swapaxes(h, -1, -2)
    else:
        raise ValueError(f"end must be 'BS' or 'UE', got {end!r}")
    v = v.reshape(-1, v.shape[-2], v.shape[-1])
    n = v.shape[1]
    norm = np.linalg.norm(v, axis=-1)
    out = np.empty(n, dtype=np.complex128)
    for x in range(n):
        ip = np.sum(v[:, x:].conj() * v[:, : n - x], axis=-1)
        den = norm[:, x:] * norm[:, : n - x]
        ok = den > 0
        out[x] = np.mean(ip[ok] / den[ok]) if ok.any() else np.nan
    return out
