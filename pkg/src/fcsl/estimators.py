"""LS pilot inversion, angle-delay thresholding and the classical baselines.

Shapes follow the pilot module: DL features ``(N_dt, N_RB, M_c, N_Rx)``,
UL features ``(K, L, N, N_Tx, M_s)``, predictions ``(N_tr, L, N, N_Tx, N_Rx)``.
"""

from __future__ import annotations

import logging

import numpy as np

from . import codec
from .pilots import PilotConfig, Timetable, dft_matrix, tx_beams

log = logging.getLogger(__name__)


class InsufficientHistoryError(ValueError):
    pass


def ls_estimate(y: np.ndarray, pilot: np.ndarray, kind: str) -> np.ndarray:
    """Least-squares inversion of a pilot block.

    ``kind="dl"`` returns ``X^-1 Y`` (pilot on the left), ``kind="ul"`` returns
    ``Y X^-1`` (pilot on the right). Works on stacked leading axes.
    """
    pilot = np.asarray(pilot)
    if np.linalg.cond(pilot) > 1e12:
        raise np.linalg.LinAlgError("pilot matrix is singular or badly conditioned")
    inv = np.linalg.inv(pilot)
    if kind == "dl":
        return inv @ y
    if kind == "ul":
        return y @ inv
    raise ValueError(f"kind must be 'dl' or 'ul', got {kind!r}")


def denoise(x: np.ndarray, sigma: float, kappa: float = 2.0) -> np.ndarray:
    """Keep entries with ``|x| > kappa * sigma``, zero the rest."""
    if sigma < 0 or kappa <= 0:
        raise ValueError("need sigma >= 0 and kappa > 0")
    if sigma == 0:
        return x.copy()
    return np.where(np.abs(x) > kappa * sigma, x, 0)


def _dn(x: np.ndarray, sigma: float, kappa: float) -> np.ndarray:
    ad = np.fft.ifftn(x, axes=(-3, -2), norm="ortho")
    return np.fft.fftn(denoise(ad, sigma, kappa), axes=(-3, -2), norm="ortho")


def dn_refine_dl(ls: np.ndarray, n_rb: int, m_c: int, sigma: float, kappa: float = 2.0) -> np.ndarray:
    """Threshold a stacked DL estimate ``(..., N_RB*M_c, N_Rx)`` in the angle-delay domain.

    The forward map is ``(F_NRB kron F_Mc)^H`` applied to the stacked rows; the
    result is mapped back with ``F_NRB kron F_Mc``.
    """
    if ls.shape[-2] != n_rb * m_c:
        raise ValueError(f"expected {n_rb * m_c} stacked rows, got {ls.shape}")
    x = ls.reshape(ls.shape[:-2] + (n_rb, m_c, ls.shape[-1]))
    return _dn(x, sigma, kappa).reshape(ls.shape)


def dn_refine_ul(ls: np.ndarray, n: int, n_tx: int, sigma: float, kappa: float = 2.0) -> np.ndarray:
    """Same as :func:`dn_refine_dl` on a stacked UL estimate ``(..., N*N_Tx, M_s)``."""
    if ls.shape[-2] != n * n_tx:
        raise ValueError(f"expected {n * n_tx} stacked rows, got {ls.shape}")
    x = ls.reshape(ls.shape[:-2] + (n, n_tx, ls.shape[-1]))
    return _dn(x, sigma, kappa).reshape(ls.shape)


def dl_feature(y: np.ndarray, noise_var: float, kappa: float = 2.0, refine: bool = True) -> np.ndarray:
    """``Y (N_dt, N_RB, M_c, N_Rx)`` to the DN-refined DL feature of the same shape."""
    g = ls_estimate(y, dft_matrix(y.shape[-2]), "dl")
    if not refine:
        return g
    n_dt, n_rb, m_c, n_rx = g.shape
    out = dn_refine_dl(g.reshape(n_dt, n_rb * m_c, n_rx), n_rb, m_c, np.sqrt(noise_var), kappa)
    return out.reshape(g.shape)


def ul_feature(y: np.ndarray, noise_var: float, kappa: float = 2.0, refine: bool = True) -> np.ndarray:
    """``Y (K, L, N, N_Tx, M_s)`` to the DN-refined UL feature of the same shape."""
    g = ls_estimate(y, dft_matrix(y.shape[-1]), "ul")
    if not refine:
        return g
    K, L, N, n_tx, m_s = g.shape
    out = dn_refine_ul(g.reshape(K, L, N * n_tx, m_s), N, n_tx, np.sqrt(noise_var), kappa)
    return out.reshape(g.shape)


# ---------------------------------------------------------------------------- LCE

def extrapolation_weights(t_obs: np.ndarray, t_new: np.ndarray) -> np.ndarray:
    """Matrix ``W`` with ``W @ y`` the least-squares line through ``(t_obs, y)`` at ``t_new``."""
    t_obs = np.asarray(t_obs, dtype=np.float64)
    t_new = np.asarray(t_new, dtype=np.float64)
    k = t_obs.size
    if k < 2:
        raise InsufficientHistoryError(f"linear extrapolation needs K >= 2 soundings, got {k}")
    tc = t_obs - t_obs.mean()
    return 1.0 / k + np.outer(t_new - t_obs.mean(), tc) / (tc @ tc)


def complete_rx(h: np.ndarray, n_rx: int) -> np.ndarray:
    """Fill unobserved UE antennas from the leading ``M_s`` observed ones.

    Rows ``h (..., M_s)`` are fit by the ``M_s`` strongest columns of the
    ``N_Rx``-point DFT basis (strength measured jointly over all rows) and the
    fit is evaluated on every antenna. Observed entries are reproduced.
    """
    m_s = h.shape[-1]
    if m_s == n_rx:
        return h.copy()
    d = dft_matrix(n_rx).conj().T  # columns are angle-domain basis vectors
    d_obs = d[:m_s]
    flat = h.reshape(-1, m_s)
    strength = np.sum(np.abs(flat @ d_obs.conj()) ** 2, axis=0)
    pick = np.sort(np.argsort(-strength, kind="stable")[:m_s])
    coef = np.linalg.lstsq(d_obs[:, pick], flat.T, rcond=None)[0]
    return (d[:, pick] @ coef).T.reshape(h.shape[:-1] + (n_rx,))


def lce_baseline(ul: np.ndarray, dl_ports, pcfg: PilotConfig, tt: Timetable, n_rx: int) -> np.ndarray:
    """Linear channel extrapolation from UL soundings only.

    Per subband, a least-squares line through the ``K`` soundings is evaluated
    at each predicted slot; unsounded UE antennas are then completed by
    :func:`complete_rx`. ``dl_ports`` is accepted for interface symmetry and
    not used.
    """
    del dl_ports
    K = ul.shape[0]
    if K < 2:
        raise InsufficientHistoryError(f"linear extrapolation needs K >= 2 soundings, got {K}")
    out = []
    for l in range(ul.shape[1]):
        w = extrapolation_weights(tt.srs_slots[:, l], tt.predict_slots)
        out.append(np.tensordot(w, ul[:, l], axes=(1, 0)))
    pred = np.stack(out, axis=1)  # (N_tr, L, N, N_Tx, M_s)
    return complete_rx(pred, n_rx)


# ---------------------------------------------------------------------------- MMSE-Type II

def type2_feedback(dl: np.ndarray, n_bit: int | None = 64) -> np.ndarray:
    """Per CSI-RS slot, the dominant port-space eigenvector scaled by sqrt(eigenvalue).

    ``dl (N_dt, N_RB, M_c, N_Rx)``. Each vector is real-packed and passed
    through the uniform quantizer with ``n_bit`` bits (``None`` skips it).
    Returns ``(N_dt, M_c)`` complex.
    """
    n_dt, _, m_c, _ = dl.shape
    cov = np.einsum("srmj,srnj->smn", dl, dl.conj()) / dl.shape[1]
    lam, vec = np.linalg.eigh(cov)
    u = vec[..., -1] * np.sqrt(np.maximum(lam[..., -1], 0.0))[:, None]
    if n_bit is None:
        return u
    packed = np.concatenate([u.real, u.imag], axis=-1)
    m = packed.shape[-1]
    b = max(1, n_bit // m)
    rec = codec.quantize_dequantize(packed, b)
    return rec[:, :m_c] + 1j * rec[:, m_c:]


def lift_ports(fb: np.ndarray, pcfg: PilotConfig, n_tx: int) -> np.ndarray:
    """Map port-space vectors ``(N_dt, M_c)`` to transmit-antenna space ``(N_dt, N_Tx)``."""
    from .pilots import beam_indices
    w = tx_beams(n_tx)
    out = np.zeros((fb.shape[0], n_tx), dtype=np.complex128)
    for s in range(fb.shape[0]):
        _, tx = beam_indices(pcfg, n_tx, s)
        out[s] = w[:, tx].conj() @ fb[s]
    return out


def correlation_from_feedback(fb: np.ndarray, pcfg: PilotConfig, n_tx: int) -> np.ndarray:
    """Sum of lifted outer products, diagonally loaded by ``1e-3 tr(R)/N_Tx``."""
    v = lift_ports(fb, pcfg, n_tx)
    r = v.T @ v.conj()
    eps = 1e-3 * np.trace(r).real / n_tx
    return r + eps * np.eye(n_tx)


def mmse_type2_baseline(ul: np.ndarray, fb: np.ndarray, pcfg: PilotConfig, tt: Timetable,
                        n_rx: int, noise_var: float) -> np.ndarray:
    """LMMSE spatial refinement of the UL feature with a fed-back BS correlation, then LCE.

    ``fb`` holds the per-slot port-space eigen-directions from
    :func:`type2_feedback`. The correlation estimate is rescaled to the UL
    signal power and applied as ``R (R + noise_var I)^-1`` to every sounded
    column. A degenerate correlation (zero or non-finite energy) falls back to
    plain LCE with a warning.
    """
    n_tx = ul.shape[-2]
    energy = np.sum(np.abs(fb) ** 2)
    if not np.isfinite(energy) or energy <= 1e-20:
        log.warning("MMSE-Type II: degenerate correlation estimate, falling back to LCE")
        return lce_baseline(ul, None, pcfg, tt, n_rx)
    r = correlation_from_feedback(fb, pcfg, n_tx)
    p_sig = max(float(np.mean(np.abs(ul) ** 2)) - noise_var, 1e-3 * float(np.mean(np.abs(ul) ** 2)))
    r = r * (p_sig * n_tx / np.trace(r).real)
    filt = r @ np.linalg.inv(r + noise_var * np.eye(n_tx))
    refined = np.einsum("ab,klnbm->klnam", filt, ul)
    return lce_baseline(refined, None, pcfg, tt, n_rx)
