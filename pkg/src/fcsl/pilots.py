"""CSI-RS / SRS pilot schedules and received pilot synthesis.

Downlink: in CSI-RS slot ``s`` the BS sends ``M_c`` beamformed ports. Port
``i`` is a DFT beam over the transmit array placed on one subcarrier of each
RB, so the equivalent channel per RB is ``G = F_s H_rb`` with ``F_s`` of size
``M_c x (M_sc*N_Tx)`` and ``H_rb`` the RB's subcarriers stacked
``(subcarrier, tx)`` row-major.

Uplink: sounding ``(k, l)`` covers subband ``l`` on every ``N_tc``-th
subcarrier. Comb bin ``j = l*N + n`` sits on subcarrier ``j * N_tc``. The UE
sounds its leading ``M_s`` antennas.

Noise is circular complex Gaussian. Its variance is set from the mean power
of the noiseless received block so that the realised SNR matches the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ConfigError, GridConfig


@dataclass(frozen=True)
class PilotConfig:
    m_c: int = 8
    m_s: int = 2
    n_rb: int = 8
    m_sc: int = 12
    n_sub: int = 2  # L
    n_tc: int = 2
    k_sound: int = 2  # K
    n_dt: int = 4
    n_tr: int = 2
    csirs_stride: int | None = None  # slots between CSI-RS occasions, None -> S

    @property
    def n_c(self) -> int:
        return self.n_rb * self.m_sc

    @property
    def n_comb(self) -> int:
        """Comb bins per subband, N = N_c / (L * N_tc)."""
        return self.n_c // (self.n_sub * self.n_tc)

    def validate(self, grid: GridConfig) -> None:
        for name in ("m_c", "m_s", "n_rb", "m_sc", "n_sub", "n_tc", "k_sound", "n_dt", "n_tr"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if grid.n_c != self.n_c:
            raise ConfigError(f"N_c={grid.n_c} but N_RB*M_sc={self.n_c}")
        if self.n_c % (self.n_sub * self.n_tc):
            raise ConfigError(f"L*N_tc={self.n_sub * self.n_tc} does not divide N_c={self.n_c}")
        if self.m_sc % self.n_tc:
            raise ConfigError(f"N_tc={self.n_tc} does not divide M_sc={self.m_sc}")
        if self.m_s > grid.n_rx:
            raise ConfigError(f"M_s={self.m_s} exceeds N_Rx={grid.n_rx}")
        if self.m_c > self.m_sc * grid.n_tx:
            raise ConfigError(f"M_c={self.m_c} exceeds the beam budget M_sc*N_Tx={self.m_sc * grid.n_tx}")


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, ``F[a, b] = exp(-j2pi ab/n) / sqrt(n)``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def pilot_matrix(m: int) -> np.ndarray:
    """Deterministic unitary ``m x m`` pilot block (normalized DFT)."""
    return dft_matrix(m)


# ---------------------------------------------------------------------------- spatial filter

@dataclass(frozen=True)
class SpatialFilter:
    slot: int
    matrix: np.ndarray  # (M_c, M_sc*N_Tx) complex, orthonormal rows
    subcarrier: np.ndarray  # (M_c,) subcarrier-within-RB of each port
    beam: np.ndarray  # (M_c,) transmit DFT beam of each port


def beam_indices(pcfg: PilotConfig, n_tx: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """(subcarrier-in-RB, tx beam) of every port in CSI-RS slot ``s``.

    Beams are enumerated ``b = s*M_c + i`` over the ``M_sc*N_Tx`` grid, tx beam
    fastest, so consecutive slots sweep fresh directions before reusing one.
    """
    b = (s * pcfg.m_c + np.arange(pcfg.m_c)) % (pcfg.m_sc * n_tx)
    return b // n_tx, b % n_tx


def tx_beams(n_tx: int) -> np.ndarray:
    """Column ``t`` is the unit-norm transmit DFT beam ``t``."""
    return dft_matrix(n_tx).conj()


def build_spatial_filter(pcfg: PilotConfig, grid: GridConfig, s: int, rng_seed=None) -> SpatialFilter:
    """Beam-selection filter for CSI-RS slot ``s``.

    The construction is deterministic; ``rng_seed`` is accepted for interface
    symmetry and ignored.
    """
    del rng_seed
    if pcfg.m_c > pcfg.m_sc * grid.n_tx:
        raise ConfigError(f"M_c={pcfg.m_c} exceeds M_sc*N_Tx={pcfg.m_sc * grid.n_tx}")
    sc, tx = beam_indices(pcfg, grid.n_tx, s)
    w = tx_beams(grid.n_tx)
    f = np.zeros((pcfg.m_c, pcfg.m_sc, grid.n_tx), dtype=np.complex128)
    f[np.arange(pcfg.m_c), sc, :] = w[:, tx].T
    return SpatialFilter(s, f.reshape(pcfg.m_c, -1), sc, tx)


# ---------------------------------------------------------------------------- timetable

@dataclass(frozen=True)
class Timetable:
    srs_slots: np.ndarray  # (K, L) absolute slot of sounding (k, l)
    csirs_slots: np.ndarray  # (N_dt,)
    predict_slots: np.ndarray  # (N_tr,)
    ul_subcarriers: np.ndarray  # (L, N) subcarrier of comb bin (l, n)
    dl_subcarriers: np.ndarray  # (N_dt, N_RB, M_c) subcarrier probed by each port

    @property
    def n_slots(self) -> int:
        return int(max(self.srs_slots.max(), self.csirs_slots.max(), self.predict_slots.max())) + 1

    def nearest_csirs(self) -> np.ndarray:
        """(K, L) index of the CSI-RS slot closest in time to each sounding (earlier wins ties)."""
        d = np.abs(self.srs_slots[..., None] - self.csirs_slots)
        return d.argmin(axis=-1)


def schedule_map(pcfg: PilotConfig, grid: GridConfig) -> Timetable:
    """Absolute slot and subcarrier indices of every pilot and prediction target.

    SRS sounding ``(k, l)`` occurs at slot ``S(kL + l)``, CSI-RS occasion ``s``
    at ``s * stride`` (stride defaults to ``S``), and the ``N_tr`` targets at
    ``S(KL - 1) + S(t + 1)``, one SRS period apart after the last sounding.
    """
    pcfg.validate(grid)
    S = grid.srs_interval
    L, K, N = pcfg.n_sub, pcfg.k_sound, pcfg.n_comb
    stride = S if pcfg.csirs_stride is None else pcfg.csirs_stride
    if stride < 1:
        raise ConfigError("CSI-RS stride must be >= 1")
    srs = S * (np.arange(K)[:, None] * L + np.arange(L)[None, :])
    csirs = stride * np.arange(pcfg.n_dt)
    pred = S * (K * L - 1) + S * (np.arange(pcfg.n_tr) + 1)
    if csirs[-1] >= pred[0]:
        raise ConfigError(f"CSI-RS slot {csirs[-1]} does not precede first predicted slot {pred[0]}")
    ul_sc = (np.arange(L)[:, None] * N + np.arange(N)[None, :]) * pcfg.n_tc
    dl_sc = np.empty((pcfg.n_dt, pcfg.n_rb, pcfg.m_c), dtype=np.int64)
    for s in range(pcfg.n_dt):
        sc, _ = beam_indices(pcfg, grid.n_tx, s)
        dl_sc[s] = np.arange(pcfg.n_rb)[:, None] * pcfg.m_sc + sc[None, :]
    return Timetable(srs, csirs, pred, ul_sc, dl_sc)


# ---------------------------------------------------------------------------- equivalent channels

def dl_equivalent(H: np.ndarray, filters, pcfg: PilotConfig, tt: Timetable) -> np.ndarray:
    """Noiseless ``G^d``: ``(N_dt, N_RB, M_c, N_Rx)`` from a slot grid ``H[slot, sc, tx, rx]``."""
    n_tx, n_rx = H.shape[2], H.shape[3]
    out = np.empty((pcfg.n_dt, pcfg.n_rb, pcfg.m_c, n_rx), dtype=np.complex128)
    for s, f in enumerate(filters):
        h_rb = H[tt.csirs_slots[s]].reshape(pcfg.n_rb, pcfg.m_sc * n_tx, n_rx)
        out[s] = f.matrix @ h_rb
    return out


def ul_equivalent(H: np.ndarray, pcfg: PilotConfig, tt: Timetable) -> np.ndarray:
    """Noiseless ``G^u``: ``(K, L, N, N_Tx, M_s)``, the sounded antenna columns."""
    slots = tt.srs_slots[:, :, None]
    sc = tt.ul_subcarriers[None, :, :]
    return H[slots, sc][..., : pcfg.m_s]


def prediction_target(H: np.ndarray, tt: Timetable) -> np.ndarray:
    """``H^dt``: ``(N_tr, L, N, N_Tx, N_Rx)`` on the comb grid at the predicted slots."""
    return H[tt.predict_slots[:, None, None], tt.ul_subcarriers[None]]


# ---------------------------------------------------------------------------- receive

@dataclass
class PilotObservation:
    kind: str  # "dl" or "ul"
    coords: tuple  # dl: (slot_index, rb); ul: (k, l, n)
    payload: np.ndarray
    noise_var: float


def _noise_var(signal: np.ndarray, snr_db: float) -> float:
    if not np.isfinite(snr_db):
        raise ConfigError(f"SNR must be finite, got {snr_db}")
    return float(np.mean(np.abs(signal) ** 2) / 10 ** (snr_db / 10))


def cgauss(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def dl_receive_array(G: np.ndarray, snr_db: float, rng: np.random.Generator,
                     noise: bool = True) -> tuple[np.ndarray, float]:
    """``Y = X^d G + N`` for every (slot, RB) block of ``G (N_dt, N_RB, M_c, N_Rx)``."""
    x = pilot_matrix(G.shape[-2])
    y = x @ G
    var = _noise_var(y, snr_db)
    if noise:
        y = y + cgauss(rng, y.shape, var)
    return y, var


def ul_receive_array(G: np.ndarray, snr_db: float, rng: np.random.Generator,
                     noise: bool = True) -> tuple[np.ndarray, float]:
    """``Y = G X^u + N`` for every (k, l, n) block of ``G (K, L, N, N_Tx, M_s)``."""
    x = pilot_matrix(G.shape[-1])
    y = G @ x
    var = _noise_var(y, snr_db)
    if noise:
        y = y + cgauss(rng, y.shape, var)
    return y, var


def dl_receive(H: np.ndarray, filters, pcfg: PilotConfig, tt: Timetable, snr_db: float,
               rng: np.random.Generator) -> list[PilotObservation]:
    """One observation per (CSI-RS slot, RB), payload ``M_c x N_Rx``."""
    if H.shape[0] <= tt.csirs_slots.max():
        raise IndexError(f"grid has {H.shape[0]} slots, CSI-RS needs slot {tt.csirs_slots.max()}")
    y, var = dl_receive_array(dl_equivalent(H, filters, pcfg, tt), snr_db, rng)
    return [PilotObservation("dl", (s, r), y[s, r], var)
            for s in range(y.shape[0]) for r in range(y.shape[1])]


def ul_receive(H: np.ndarray, pcfg: PilotConfig, tt: Timetable, snr_db: float,
               rng: np.random.Generator) -> list[PilotObservation]:
    """One observation per (k, l, n), payload ``N_Tx x M_s``."""
    need = int(tt.srs_slots.max())
    if H.shape[0] <= need:
        raise IndexError(f"grid has {H.shape[0]} slots, SRS needs slot {need}")
    y, var = ul_receive_array(ul_equivalent(H, pcfg, tt), snr_db, rng)
    K, L, N = y.shape[:3]
    return [PilotObservation("ul", (k, l, n), y[k, l, n], var)
            for k in range(K) for l in range(L) for n in range(N)]
