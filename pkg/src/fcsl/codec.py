"""Angle-delay sparsification and uniform scalar quantization of feedback codewords.

Quantizer. With ``B = N_bit / M`` bits per element, range ``Z = max(v) - min(v)``
and step ``rho = Z * 2**-B``, element ``m`` maps to
``floor((v_m - v_min) / rho)`` clamped to ``[0, 2**B - 1]`` and is rebuilt at
the midpoint ``v_min + (index + 0.5) * rho``. A zero range sends all-zero
indices and rebuilds ``v_min`` exactly.

Side information travels as two float32 values outside the ``N_bit`` budget.
They are rounded outward at quantization time (``v_min`` down, ``Z`` up), so
every input stays inside the transmitted range and the midpoint error bound
``rho / 2`` holds for the values the receiver actually sees.

Wire format (little-endian header)::

    u32 N_bit | u32 M | f32 v_min | f32 Z | ceil(N_bit/8) payload bytes

Payload bits are the indices written MSB first, ``B`` bits each, back to back.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel import ConfigError

_HEADER = struct.Struct("<IIff")


class FrameError(ValueError):
    """Malformed or inconsistent bit frame."""


# ---------------------------------------------------------------------------- transforms

def _check_stacked(g: np.ndarray, n_rb: int, m_c: int) -> None:
    if g.ndim < 2 or g.shape[-2] != n_rb * m_c:
        raise ValueError(f"expected (..., {n_rb * m_c}, N_Rx) stacked ports, got {g.shape}")


def sparsify(g: np.ndarray, n_rb: int, m_c: int) -> np.ndarray:
    """``(F_NRB kron F_Mc) G F_NRx`` reshaped to ``(..., N_RB, M_c*N_Rx)``.

    ``g`` is ``(..., N_RB*M_c, N_Rx)`` with row index ``r*M_c + m``. All DFTs are
    unitary so the map preserves the Frobenius norm.
    """
    _check_stacked(g, n_rb, m_c)
    n_rx = g.shape[-1]
    x = g.reshape(g.shape[:-2] + (n_rb, m_c, n_rx))
    x = np.fft.fftn(x, axes=(-3, -2, -1), norm="ortho")
    return x.reshape(g.shape[:-2] + (n_rb, m_c * n_rx))


def desparsify(h: np.ndarray, m_c: int, n_rx: int) -> np.ndarray:
    """Inverse of :func:`sparsify`, back to ``(..., N_RB*M_c, N_Rx)``."""
    if h.ndim < 2 or h.shape[-1] != m_c * n_rx:
        raise ValueError(f"expected (..., N_RB, {m_c * n_rx}), got {h.shape}")
    n_rb = h.shape[-2]
    x = h.reshape(h.shape[:-2] + (n_rb, m_c, n_rx))
    x = np.fft.ifftn(x, axes=(-3, -2, -1), norm="ortho")
    return x.reshape(h.shape[:-2] + (n_rb * m_c, n_rx))


def pack_complex(x: np.ndarray) -> np.ndarray:
    """Complex ``(..., R, C)`` to real ``(..., 2R, C)``: real rows then imaginary rows."""
    return np.concatenate([x.real, x.imag], axis=-2)


def unpack_complex(x: np.ndarray) -> np.ndarray:
    r = x.shape[-2] // 2
    return x[..., :r, :] + 1j * x[..., r:, :]


# ---------------------------------------------------------------------------- quantizer

def bits_per_element(n_bit: int, m: int) -> int:
    if m < 1 or n_bit < 1 or n_bit % m:
        raise ConfigError(f"N_bit={n_bit} is not a positive multiple of M={m}")
    b = n_bit // m
    if b > 32:
        raise ConfigError(f"{b} bits per element is more than supported (32)")
    return b


def side_info(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row float32-representable ``(v_min, Z)`` that enclose every entry."""
    lo = v.min(axis=-1)
    hi = v.max(axis=-1)
    vmin = lo.astype(np.float32)
    vmin = np.where(vmin.astype(np.float64) > lo, np.nextafter(vmin, np.float32(-np.inf)), vmin)
    z = np.maximum(hi - vmin.astype(np.float64), 0.0).astype(np.float32)
    short = vmin.astype(np.float64) + z.astype(np.float64) < hi
    z = np.where(short, np.nextafter(z, np.float32(np.inf)), z)
    z = np.where(hi == lo, np.float32(0.0), z)
    return vmin.astype(np.float64), z.astype(np.float64)


class NonFiniteCodewordError(ValueError, FloatingPointError):
    """The encoder produced NaN or inf; nothing meaningful can be fed back."""


def quantize_indices(v: np.ndarray, b: int):
    """Vectorised quantizer over the last axis. Returns (indices, v_min, Z)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.isfinite(v).all():
        raise NonFiniteCodewordError("codeword has non-finite entries")
    vmin, z = side_info(v)
    rho = z * 2.0 ** -b
    safe = np.where(rho > 0, rho, 1.0)
    idx = np.floor((v - vmin[..., None]) / safe[..., None])
    idx = np.clip(idx, 0, 2**b - 1)
    idx = np.where(rho[..., None] > 0, idx, 0).astype(np.int64)
    return idx, vmin, z


def reconstruct(idx: np.ndarray, vmin, z, b: int) -> np.ndarray:
    vmin = np.asarray(vmin, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    rho = z * 2.0 ** -b
    out = vmin[..., None] + (idx + 0.5) * rho[..., None]
    return np.where(rho[..., None] > 0, out, vmin[..., None])


def quantize_dequantize(v: np.ndarray, b: int) -> np.ndarray:
    """Round trip used inside training (rows quantized independently)."""
    idx, vmin, z = quantize_indices(v, b)
    return reconstruct(idx, vmin, z, b)


@dataclass(frozen=True)
class BitFrame:
    n_bit: int
    m: int
    v_min: float
    z: float
    payload: bytes

    @property
    def b(self) -> int:
        return bits_per_element(self.n_bit, self.m)

    @property
    def rho(self) -> float:
        return self.z * 2.0 ** -self.b

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.payload, dtype=np.uint8))[: self.n_bit]

    def indices(self) -> np.ndarray:
        b = self.b
        bits = self.bits.reshape(self.m, b).astype(np.int64)
        return bits @ (1 << np.arange(b - 1, -1, -1, dtype=np.int64))

    def to_bytes(self) -> bytes:
        return _HEADER.pack(self.n_bit, self.m, self.v_min, self.z) + self.payload

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BitFrame":
        if len(raw) < _HEADER.size:
            raise FrameError(f"frame of {len(raw)} bytes is shorter than the {_HEADER.size}-byte header")
        n_bit, m, vmin, z = _HEADER.unpack_from(raw)
        need = (n_bit + 7) // 8
        body = bytes(raw[_HEADER.size:])
        if len(body) != need:
            raise FrameError(f"payload has {len(body)} bytes, N_bit={n_bit} needs {need}")
        try:
            bits_per_element(n_bit, m)
        except ConfigError as e:
            raise FrameError(str(e)) from None
        if not (z >= 0):
            raise FrameError(f"negative range Z={z}")
        return cls(n_bit, m, float(vmin), float(z), body)


def quantize(v, n_bit: int) -> BitFrame:
    """Quantize a 1-D codeword to ``n_bit`` bits."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    b = bits_per_element(n_bit, v.size)
    idx, vmin, z = quantize_indices(v, b)
    shifts = np.arange(b - 1, -1, -1)
    bits = ((idx[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    return BitFrame(n_bit, v.size, float(vmin), float(z), np.packbits(bits).tobytes())


def dequantize(frame: BitFrame) -> np.ndarray:
    need = (frame.n_bit + 7) // 8
    if len(frame.payload) != need:
        raise FrameError(f"payload has {len(frame.payload)} bytes, N_bit={frame.n_bit} needs {need}")
    return reconstruct(frame.indices(), frame.v_min, frame.z, frame.b)
