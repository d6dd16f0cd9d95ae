"""Training/evaluation samples and the FCDG dataset container.

A sample is one channel drop seen through the pilot frame:

* ``gd_hat`` DN-refined DL feature ``(N_dt, N_RB, M_c, N_Rx)``
* ``gd`` noiseless DL equivalent channel, same shape (TMCFN target)
* ``gu_hat`` DN-refined UL feature ``(K, L, N, N_Tx, M_s)``
* ``hdt`` prediction target ``(N_tr, L, N, N_Tx, N_Rx)``

Container layout (little-endian)::

    magic "FCDG" | u16 version
    GridConfig fields in declaration order (ints as u32, floats as f64)
    u32 slot count | u32 slot indices      (slots stored in every grid record)
    u32 sample count
    records until EOF

    record: u8 kind | u32 ncoord | u32 coords[ncoord] | f64 aux
            | u8 rank | u32 dims[rank] | f64 payload (complex interleaved re, im)

Record kinds: 0 grid ``(sample)`` with aux = SNR in dB and payload
``(slot, subcarrier, tx, rx)``; 1 DL observation ``(sample, csirs_slot, rb)``;
2 UL observation ``(sample, k, l, n)``. Observation aux is the noise variance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from .channel import ChannelProfile, GridConfig, draw_paths, sample_grid
from .estimators import dl_feature, ul_feature
from .pilots import (PilotConfig, Timetable, build_spatial_filter, dl_equivalent, dl_receive_array,
                     prediction_target, schedule_map, ul_equivalent, ul_receive_array)

MAGIC = b"FCDG"
VERSION = 1
KIND_GRID, KIND_DL, KIND_UL = 0, 1, 2


class DatasetFormatError(ValueError):
    """Malformed or incompatible FCDG file."""


@dataclass
class Dataset:
    gd_hat: np.ndarray
    gd: np.ndarray
    gu_hat: np.ndarray
    hdt: np.ndarray
    snr_db: np.ndarray
    var_dl: np.ndarray
    var_ul: np.ndarray

    def __len__(self) -> int:
        return self.hdt.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(*(getattr(self, f.name)[idx] for f in fields(self)))

    @classmethod
    def concat(cls, parts) -> "Dataset":
        return cls(*(np.concatenate([getattr(p, f.name) for p in parts]) for f in fields(cls)))


class SampleMaker:
    """Builds samples for a fixed grid/pilot configuration.

    Every sample ``i`` of a run seeded with ``seed`` owns two independent
    streams spawned from ``SeedSequence(seed)``: one for the channel drop (and
    the SNR draw), one for the receiver noise. Passing a fixed ``snr_db``
    therefore keeps drops and noise shapes paired across SNR points.
    """

    def __init__(self, grid: GridConfig, pcfg: PilotConfig, profile: ChannelProfile | None = None,
                 kappa: float = 2.0):
        self.grid, self.pcfg = grid, pcfg
        self.profile = profile if profile is not None else ChannelProfile(f_c=grid.f_c, delta_f=grid.delta_f)
        self.kappa = kappa
        self.tt: Timetable = schedule_map(pcfg, grid)
        self.filters = [build_spatial_filter(pcfg, grid, s) for s in range(pcfg.n_dt)]
        self.slots = np.unique(np.concatenate([self.tt.csirs_slots, self.tt.srs_slots.ravel(),
                                               self.tt.predict_slots]))

    def streams(self, seed: int, n: int, start: int = 0):
        ss = np.random.SeedSequence(seed).spawn(start + n)[start:]
        return [tuple(np.random.default_rng(c) for c in s.spawn(2)) for s in ss]

    def full_grid(self, part: np.ndarray) -> np.ndarray:
        """Place a grid stored at ``self.slots`` onto absolute slot indices."""
        h = np.zeros((self.tt.n_slots,) + part.shape[1:], dtype=np.complex128)
        h[self.slots] = part
        return h

    def draw(self, chan_rng, snr_choices):
        paths = draw_paths(chan_rng, self.profile)
        snr = float(chan_rng.choice(np.asarray(snr_choices, dtype=np.float64)))
        return sample_grid(paths, self.grid, slots=self.slots), snr

    def observe(self, h_part: np.ndarray, snr_db: float, noise_rng):
        """Noisy received DL and UL pilot blocks plus the clean quantities."""
        h = self.full_grid(h_part)
        gd = dl_equivalent(h, self.filters, self.pcfg, self.tt)
        gu = ul_equivalent(h, self.pcfg, self.tt)
        yd, vd = dl_receive_array(gd, snr_db, noise_rng)
        yu, vu = ul_receive_array(gu, snr_db, noise_rng)
        return gd, (yd, vd), (yu, vu), prediction_target(h, self.tt)

    def features(self, yd, vd, yu, vu):
        return dl_feature(yd, vd, self.kappa), ul_feature(yu, vu, self.kappa)

    def sample(self, chan_rng, noise_rng, snr_choices, snr_db=None):
        h_part, snr = self.draw(chan_rng, snr_choices)
        if snr_db is not None:
            snr = float(snr_db)
        gd, (yd, vd), (yu, vu), hdt = self.observe(h_part, snr, noise_rng)
        gdh, guh = self.features(yd, vd, yu, vu)
        return dict(gd_hat=gdh, gd=gd, gu_hat=guh, hdt=hdt, snr_db=snr, var_dl=vd, var_ul=vu,
                    grid=h_part, yd=yd, yu=yu)


def generate(maker: SampleMaker, n: int, seed: int, snr_choices=(0.0, 5.0, 10.0, 15.0, 20.0),
             snr_db: float | None = None, start: int = 0, writer: "FCDGWriter | None" = None) -> Dataset:
    """Draw ``n`` samples (indices ``start .. start+n-1`` of the seed's stream)."""
    cols = {k: [] for k in ("gd_hat", "gd", "gu_hat", "hdt", "snr_db", "var_dl", "var_ul")}
    for i, (crng, nrng) in enumerate(maker.streams(seed, n, start)):
        s = maker.sample(crng, nrng, snr_choices, snr_db)
        if writer is not None:
            writer.write_sample(i, s)
        for k in cols:
            cols[k].append(s[k])
    return Dataset(**{k: np.asarray(v) for k, v in cols.items()})


# ---------------------------------------------------------------------------- FCDG container

_GRID_TYPES = {int: "I", float: "d"}


def _grid_struct() -> struct.Struct:
    fmt = "<" + "".join(_GRID_TYPES[type(getattr(GridConfig(), f.name))] for f in fields(GridConfig))
    return struct.Struct(fmt)


def _interleave(x: np.ndarray) -> bytes:
    out = np.empty(x.shape + (2,), dtype="<f8")
    out[..., 0], out[..., 1] = x.real, x.imag
    return out.tobytes()


class FCDGWriter:
    """Streaming writer; use as a context manager."""

    def __init__(self, path, grid: GridConfig, slots, n_samples: int):
        self.f = open(path, "wb")
        slots = np.asarray(slots, dtype=np.int64)
        self.f.write(MAGIC + struct.pack("<H", VERSION))
        self.f.write(_grid_struct().pack(*(getattr(grid, f.name) for f in fields(GridConfig))))
        self.f.write(struct.pack("<I", slots.size) + slots.astype("<u4").tobytes())
        self.f.write(struct.pack("<I", n_samples))

    def record(self, kind: int, coords, aux: float, payload: np.ndarray) -> None:
        payload = np.asarray(payload, dtype=np.complex128)
        head = struct.pack("<BI", kind, len(coords)) + np.asarray(coords, dtype="<u4").tobytes()
        head += struct.pack("<dB", aux, payload.ndim) + np.asarray(payload.shape, dtype="<u4").tobytes()
        self.f.write(head + _interleave(payload))

    def write_sample(self, i: int, s: dict) -> None:
        self.record(KIND_GRID, (i,), s["snr_db"], s["grid"])
        yd, yu = s["yd"], s["yu"]
        for slot in range(yd.shape[0]):
            for rb in range(yd.shape[1]):
                self.record(KIND_DL, (i, slot, rb), s["var_dl"], yd[slot, rb])
        for k, l, n in np.ndindex(*yu.shape[:3]):
            self.record(KIND_UL, (i, k, l, n), s["var_ul"], yu[k, l, n])

    def close(self) -> None:
        self.f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class FCDGHeader:
    version: int
    grid: GridConfig
    slots: np.ndarray
    n_samples: int


def _read_exact(f, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise DatasetFormatError(f"truncated file: wanted {n} bytes, got {len(b)}")
    return b


def read_header(f) -> FCDGHeader:
    if _read_exact(f, 4) != MAGIC:
        raise DatasetFormatError("not an FCDG file (bad magic)")
    (version,) = struct.unpack("<H", _read_exact(f, 2))
    if version != VERSION:
        raise DatasetFormatError(f"unsupported FCDG version {version}")
    gs = _grid_struct()
    vals = gs.unpack(_read_exact(f, gs.size))
    grid = GridConfig(**{fl.name: v for fl, v in zip(fields(GridConfig), vals)})
    (ns,) = struct.unpack("<I", _read_exact(f, 4))
    slots = np.frombuffer(_read_exact(f, 4 * ns), dtype="<u4").astype(np.int64)
    (n,) = struct.unpack("<I", _read_exact(f, 4))
    return FCDGHeader(version, grid, slots, n)


def iter_records(f):
    """Yield ``(kind, coords, aux, payload)`` until end of file."""
    while True:
        b = f.read(5)
        if not b:
            return
        if len(b) != 5:
            raise DatasetFormatError("truncated record header")
        kind, nc = struct.unpack("<BI", b)
        if kind not in (KIND_GRID, KIND_DL, KIND_UL) or nc > 8:
            raise DatasetFormatError(f"bad record (kind {kind}, {nc} coords)")
        coords = tuple(int(c) for c in np.frombuffer(_read_exact(f, 4 * nc), dtype="<u4"))
        aux, rank = struct.unpack("<dB", _read_exact(f, 9))
        shape = tuple(int(d) for d in np.frombuffer(_read_exact(f, 4 * rank), dtype="<u4"))
        count = int(np.prod(shape)) if shape else 1
        raw = np.frombuffer(_read_exact(f, 16 * count), dtype="<f8").reshape(shape + (2,))
        yield kind, coords, aux, raw[..., 0] + 1j * raw[..., 1]


def read_dataset(path, maker: SampleMaker) -> Dataset:
    """Rebuild samples from an FCDG file (features are recomputed from the stored pilots)."""
    p = maker.pcfg
    with open(path, "rb") as f:
        hdr = read_header(f)
        if hdr.grid != maker.grid:
            diff = [fl.name for fl in fields(GridConfig) if getattr(hdr.grid, fl.name) != getattr(maker.grid, fl.name)]
            raise DatasetFormatError(f"grid config differs from the file in: {', '.join(diff)}")
        if not np.array_equal(hdr.slots, maker.slots):
            raise DatasetFormatError(f"file stores slots {hdr.slots.tolist()}, config needs {maker.slots.tolist()}")
        out = []
        cur = None

        def finish(c):
            if c is None:
                return
            h = maker.full_grid(c["grid"])
            gdh, guh = maker.features(c["yd"], c["vd"], c["yu"], c["vu"])
            out.append(dict(gd_hat=gdh, gd=dl_equivalent(h, maker.filters, p, maker.tt), gu_hat=guh,
                            hdt=prediction_target(h, maker.tt), snr_db=c["snr"], var_dl=c["vd"], var_ul=c["vu"]))

        n_rx, n_tx = maker.grid.n_rx, maker.grid.n_tx
        for kind, coords, aux, payload in iter_records(f):
            if kind == KIND_GRID:
                finish(cur)
                cur = dict(grid=payload, snr=aux, vd=0.0, vu=0.0,
                           yd=np.zeros((p.n_dt, p.n_rb, p.m_c, n_rx), complex),
                           yu=np.zeros((p.k_sound, p.n_sub, p.n_comb, n_tx, p.m_s), complex))
            elif cur is None:
                raise DatasetFormatError("observation record before any grid record")
            elif kind == KIND_DL:
                cur["yd"][coords[1], coords[2]] = payload
                cur["vd"] = aux
            else:
                cur["yu"][coords[1], coords[2], coords[3]] = payload
                cur["vu"] = aux
        finish(cur)
    if len(out) != hdr.n_samples:
        raise DatasetFormatError(f"header announces {hdr.n_samples} samples, found {len(out)}")
    keys = out[0].keys() if out else ()
    return Dataset(**{k: np.asarray([s[k] for s in out]) for k in keys})
