"""Parametric geometric multipath channels on an OFDM slot/subcarrier grid.

Both link ends use uniform linear arrays. A drop is a :class:`PathSet`; the
channel at time ``t`` and baseband frequency ``f`` is

    H(t, f) = sum_p alpha_p exp(j2pi nu_p t) exp(-j2pi tau_p f) a_T(theta_T,p) a_R(theta_R,p)^H

with shape ``(N_Tx, N_Rx)``. Subcarrier ``k`` sits at ``k * delta_f``; the
carrier phase is absorbed into the path gains. Uplink and downlink read the
same array (TDD reciprocity), so there is exactly one grid per drop.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class GridConfig:
    n_tx: int = 16
    n_rx: int = 2
    n_c: int = 96
    delta_f: float = 30e3
    delta_t: float = 5e-3
    srs_interval: int = 2  # S, in units of delta_t
    f_c: float = 12e9
    spacing: float = 0.5

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_c", "srs_interval"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not (self.delta_f > 0 and self.delta_t > 0 and self.f_c > 0 and self.spacing > 0):
            raise ConfigError("delta_f, delta_t, f_c and spacing must be positive")

    @property
    def subcarrier_freqs(self) -> np.ndarray:
        return np.arange(self.n_c) * self.delta_f


@dataclass
class PathSet:
    gains: np.ndarray  # complex (P,)
    delays: np.ndarray  # seconds
    dopplers: np.ndarray  # Hz
    aod: np.ndarray  # radians
    aoa: np.ndarray  # radians

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.complex128).reshape(-1)
        for name in ("delays", "dopplers", "aod", "aoa"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(-1))
        p = self.gains.size
        if p < 1:
            raise ConfigError("a path set needs at least one path")
        if any(getattr(self, n).size != p for n in ("delays", "dopplers", "aod", "aoa")):
            raise ConfigError("path parameter arrays differ in length")
        if (self.delays < 0).any():
            raise ConfigError("path delays must be non-negative")

    @property
    def n_paths(self) -> int:
        return self.gains.size

    def scaled(self, c: complex) -> "PathSet":
        return PathSet(self.gains * c, self.delays, self.dopplers, self.aod, self.aoa)


@dataclass(frozen=True)
class ChannelProfile:
    """Statistics that :func:`draw_paths` samples a drop from."""

    p_min: int = 4
    p_max: int = 12
    delay_spread: float = 300e-9
    max_delay: float | None = None  # defaults to one OFDM symbol span 1/delta_f
    speed_kmh: float = 3.0
    f_c: float = 12e9
    aod_spread_deg: float = 10.0  # per-path spread around a common cluster angle
    aoa_spread_deg: float = 30.0
    delta_f: float = 30e3

    @property
    def doppler_max(self) -> float:
        return self.speed_kmh / 3.6 * self.f_c / SPEED_OF_LIGHT


def steering(theta, count: int, spacing: float = 0.5) -> np.ndarray:
    """ULA response, element ``i`` is ``exp(j 2 pi spacing i sin(theta))``.

    ``theta`` may be an array; the element axis is appended last.
    """
    if count < 1:
        raise ConfigError("array size must be >= 1")
    th = np.asarray(theta, dtype=np.float64)
    return np.exp(2j * np.pi * spacing * np.arange(count) * np.sin(th)[..., None])


def _coefficients(paths: PathSet, t, f) -> np.ndarray:
    """Per-path complex weight on a (t, f) grid, shape (len t, len f, P)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    f = np.atleast_1d(np.asarray(f, dtype=np.float64))
    dop = np.exp(2j * np.pi * t[:, None] * paths.dopplers[None, :])
    dly = np.exp(-2j * np.pi * f[:, None] * paths.delays[None, :])
    return paths.gains * dop[:, None, :] * dly[None, :, :]


def cfr_grid(paths: PathSet, times, freqs, cfg: GridConfig) -> np.ndarray:
    """Channel frequency response on a grid, shape (len(times), len(freqs), N_Tx, N_Rx)."""
    a_t = steering(paths.aod, cfg.n_tx, cfg.spacing)
    a_r = steering(paths.aoa, cfg.n_rx, cfg.spacing)
    coef = _coefficients(paths, times, freqs)
    return np.einsum("tfp,pi,pj->tfij", coef, a_t, a_r.conj(), optimize=True)


def cfr(paths: PathSet, t: float, f: float, cfg: GridConfig) -> np.ndarray:
    """Channel matrix ``H(t, f)`` of shape ``(N_Tx, N_Rx)``."""
    return cfr_grid(paths, [t], [f], cfg)[0, 0]


def cir(paths: PathSet, t: float, delay_grid, cfg: GridConfig) -> np.ndarray:
    """Tapped-delay-line impulse response at time ``t``.

    Each path lands on its nearest grid tap. Returns ``(len(delay_grid), N_Tx, N_Rx)``.
    Raises ``ValueError`` for a path outside the grid (more than half a step
    beyond either end).
    """
    grid = np.asarray(delay_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("delay grid must be a non-empty 1-D sequence")
    if grid.size > 1 and not (np.diff(grid) > 0).all():
        raise ValueError("delay grid must be strictly increasing")
    half = 0.5 * (np.diff(grid).min() if grid.size > 1 else 0.0)
    lo, hi = grid[0] - half, grid[-1] + half
    bad = (paths.delays < lo - 1e-18) | (paths.delays > hi + 1e-18)
    if bad.any():
        raise ValueError(f"path delay {paths.delays[bad][0]:.3e} s outside grid [{grid[0]:.3e}, {grid[-1]:.3e}]")
    taps = np.abs(paths.delays[:, None] - grid[None, :]).argmin(axis=1)
    a_t = steering(paths.aod, cfg.n_tx, cfg.spacing)
    a_r = steering(paths.aoa, cfg.n_rx, cfg.spacing)
    w = paths.gains * np.exp(2j * np.pi * paths.dopplers * t)
    out = np.zeros((grid.size, cfg.n_tx, cfg.n_rx), dtype=np.complex128)
    np.add.at(out, taps, w[:, None, None] * a_t[:, :, None] * a_r.conj()[:, None, :])
    return out


def sample_grid(paths: PathSet, cfg: GridConfig, n_slots: int | None = None, slots=None) -> np.ndarray:
    """Sample the channel at slots ``n * delta_t`` and subcarriers ``k * delta_f``.

    Pass ``n_slots`` for slots ``0..n_slots-1`` or an explicit ``slots`` list.
    Returns ``(n_slots, N_c, N_Tx, N_Rx)`` complex.
    """
    if slots is None:
        if n_slots is None or n_slots < 1:
            raise ConfigError("n_slots must be >= 1")
        slots = np.arange(n_slots)
    slots = np.asarray(slots)
    return cfr_grid(paths, slots * cfg.delta_t, cfg.subcarrier_freqs, cfg)


def draw_paths(seed, profile: ChannelProfile = ChannelProfile()) -> PathSet:
    """Draw one reproducible multipath drop.

    Path count is uniform in ``[p_min, p_max]``. Delays are exponential with
    mean ``delay_spread`` (truncated at ``max_delay``), powers follow the
    matching exponential profile with log-normal jitter and are normalized to
    unit total power. Doppler shifts are ``nu_max * cos(phi)`` with uniform
    ``phi``, so ``|nu| <= nu_max`` by construction.
    """
    if profile.p_min < 1 or profile.p_max < profile.p_min:
        raise ConfigError(f"empty path-count range [{profile.p_min}, {profile.p_max}]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = int(rng.integers(profile.p_min, profile.p_max + 1))
    max_delay = profile.max_delay if profile.max_delay is not None else 1.0 / profile.delta_f
    delays = np.minimum(rng.exponential(profile.delay_spread, p), max_delay)
    delays[0] = 0.0  # delays are relative to the earliest arrival
    power = np.exp(-delays / profile.delay_spread) * 10 ** (rng.normal(0.0, 3.0, p) / 10)
    power /= power.sum()
    gains = np.sqrt(power) * np.exp(2j * np.pi * rng.random(p))
    dopplers = profile.doppler_max * np.cos(2 * np.pi * rng.random(p))
    aod0, aoa0 = rng.uniform(-np.pi / 3, np.pi / 3), rng.uniform(-np.pi / 2, np.pi / 2)
    aod = aod0 + np.deg2rad(profile.aod_spread_deg) * rng.laplace(0.0, 1.0 / np.sqrt(2), p)
    aoa = aoa0 + np.deg2rad(profile.aoa_spread_deg) * rng.laplace(0.0, 1.0 / np.sqrt(2), p)
    return PathSet(gains, delays, dopplers, aod, aoa)


def grid_config_fields() -> list[str]:
    return [f.name for f in fields(GridConfig)]
