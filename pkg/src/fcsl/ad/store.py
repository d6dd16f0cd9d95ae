"""Parameter store: named tensors plus the ``FCSL`` binary container.

File layout (all little-endian): magic ``b"FCSL"``, ``u16`` version, then
repeated records of ``u16`` name length, UTF-8 name, ``u8`` rank, ``u32`` per
dimension and the float64 payload in row-major order. Records run to EOF.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path
from typing import Iterator

import numpy as np

from .tensor import Tensor

MAGIC = b"FCSL"
VERSION = 1


class StoreFormatError(ValueError):
    pass


def init_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class ParamStore:
    """Ordered name -> Tensor map holding trainable weights and buffers."""

    def __init__(self):
        self._items: "OrderedDict[str, Tensor]" = OrderedDict()
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, value, trainable: bool = True) -> Tensor:
        if name in self._items:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=trainable, name=name)
        self._items[name] = t
        self._trainable[name] = trainable
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._items[name]

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def items(self):
        return self._items.items()

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self._items if n.startswith(prefix)]

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def trainable(self, prefix: str = "") -> list[Tensor]:
        return [t for n, t in self._items.items() if self._trainable[n] and n.startswith(prefix)]

    def zero_grad(self) -> None:
        for t in self._items.values():
            t.grad = None

    def state(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, t.data.copy()) for n, t in self._items.items())

    def load_state(self, state, prefix: str = "", strict: bool = True) -> list[str]:
        """Copy arrays into existing tensors; returns the names loaded."""
        loaded = []
        for name, t in self._items.items():
            if not name.startswith(prefix):
                continue
            if name not in state:
                if strict:
                    raise KeyError(f"missing parameter {name!r} in state")
                continue
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.shape:
                raise ValueError(f"shape mismatch for {name!r}: {arr.shape} vs {t.shape}")
            t.data = arr.copy()
            loaded.append(name)
        return loaded

    def count(self, prefix: str = "") -> int:
        return int(sum(t.size for n, t in self._items.items() if n.startswith(prefix)))


def save_params(path, arrays) -> None:
    """Write a name -> array mapping in the FCSL container format."""
    buf = bytearray(MAGIC + struct.pack("<H", VERSION))
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise StoreFormatError(f"record {name!r} exceeds format limits")
        buf += struct.pack("<H", len(raw)) + raw
        buf += struct.pack("<B", arr.ndim)
        buf += struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += arr.tobytes()
    Path(path).write_bytes(bytes(buf))


def load_params(path) -> "OrderedDict[str, np.ndarray]":
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {raw[:4]!r}")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    pos = 6
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    try:
        while pos < len(raw):
            (n,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", raw, pos)
            pos += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            end = pos + 8 * count
            if end > len(raw):
                raise StoreFormatError(f"{path}: truncated payload for {name!r}")
            out[name] = np.frombuffer(raw[pos:end], dtype="<f8").reshape(dims).astype(np.float64)
            pos = end
    except struct.error as exc:
        raise StoreFormatError(f"{path}: truncated record") from exc
    return out
