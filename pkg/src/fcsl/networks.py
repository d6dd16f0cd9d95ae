"""Feedback autoencoder (TMCFN), UL/DL fusion (JUDCEN), predictor (MCPN) and their composition.

Complex data inside the networks is carried as real tensors in one of two
layouts, both documented where they are produced:

* row-packed ``(..., 2R, C)``: real rows followed by imaginary rows
  (TMCFN and the shape-matching bridge);
* split pairs ``(re, im)`` of equal-shape real tensors (MCPN transforms).

Per-sample tensor shapes (leading batch axis omitted):

* DL feature ``(N_dt, N_RB, M_c, N_Rx)`` complex
* UL feature ``(K, L, N, N_Tx, M_s)`` complex
* prediction ``(N_tr, L, N, N_Tx, N_Rx)`` complex
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import ad, codec
from .ad import ParamStore, Tensor, ops
from .channel import ConfigError, GridConfig
from .nn import SAB, TFFL, BatchNorm, LayerNorm, Linear, MambaBlock, MultiHeadAttention
from .pilots import PilotConfig, Timetable, beam_indices, dft_matrix, schedule_map, tx_beams


@dataclass(frozen=True)
class ModelConfig:
    d_f: int = 64
    n_state: int = 16  # N_H
    n_heads: int = 2  # N_m
    n_enc: int = 1
    n_dec: int = 1
    n_sab: int = 1  # N_SA
    n_mamba: int = 2  # N_MA
    n_bit: int = 400
    bits_per_element: int = 4
    p_drop: float = 0.1
    causal_decoder: bool = False
    zero_fill_lift: bool = False

    @property
    def codeword_len(self) -> int:
        if self.n_bit % self.bits_per_element:
            raise ConfigError(f"N_bit={self.n_bit} is not a multiple of B={self.bits_per_element}")
        return self.n_bit // self.bits_per_element


@dataclass
class Geometry:
    """Everything shape-related the networks derive from the grid and pilot configs."""

    grid: GridConfig
    pilot: PilotConfig
    tt: Timetable = field(init=False)

    def __post_init__(self):
        self.tt = schedule_map(self.pilot, self.grid)

    @property
    def n_tx(self):
        return self.grid.n_tx

    @property
    def n_rx(self):
        return self.grid.n_rx

    @property
    def kln(self):
        p = self.pilot
        return p.k_sound * p.n_sub * p.n_comb

    @property
    def n_freq(self):
        return self.pilot.n_sub * self.pilot.n_comb

    @property
    def n_sq(self):
        return 2 * self.kln


# ---------------------------------------------------------------------------- complex helpers

def pack_rows(x: np.ndarray) -> np.ndarray:
    return codec.pack_complex(x)


def unpack_rows(x) -> np.ndarray:
    x = x.data if isinstance(x, Tensor) else x
    return codec.unpack_complex(x)


def real_block(a: np.ndarray) -> np.ndarray:
    """Real ``2m x 2n`` matrix acting on row-packed vectors like complex ``a``."""
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def cmatmul_left(a: np.ndarray, re, im):
    """``a @ (re + j im)`` for a constant complex matrix ``a``."""
    ar, ai = a.real, a.imag
    return ops.matmul(ar, re) - ops.matmul(ai, im), ops.matmul(ar, im) + ops.matmul(ai, re)


def cmatmul_right(re, im, a: np.ndarray):
    """``(re + j im) @ a`` for a constant complex matrix ``a``."""
    ar, ai = a.real, a.imag
    return ops.matmul(re, ar) - ops.matmul(im, ai), ops.matmul(re, ai) + ops.matmul(im, ar)


# ---------------------------------------------------------------------------- TMCFN

class TMCFN:
    """Transformer feedback autoencoder for one DL slot at a time.

    Encoder: angle-delay sparsification, row-packing to ``(2N_d, d_h)``,
    ``n_enc`` blocks of (attention, TFFL) each with residual + layer norm,
    flatten and a linear map to the ``M``-long codeword. The codeword goes
    through the uniform quantizer (identity gradient). Decoder: linear
    expansion back to ``(2N_d, d_h)``, ``n_dec`` blocks, a final linear map and
    the inverse transform.
    """

    def __init__(self, params: ParamStore, geo: Geometry, cfg: ModelConfig, rng, prefix: str = "tmcfn"):
        self.geo, self.cfg = geo, cfg
        p = geo.pilot
        self.n_d = p.n_rb
        self.d_h = p.m_c * geo.n_rx
        flat = 2 * self.n_d * self.d_h
        m = cfg.codeword_len
        self.enc = [self._block(params, f"{prefix}.enc.{i}", rng, False) for i in range(cfg.n_enc)]
        self.enc_out = Linear(params, f"{prefix}.enc.fc", flat, m, rng)
        self.dec_in = Linear(params, f"{prefix}.dec.fc", m, flat, rng)
        self.dec = [self._block(params, f"{prefix}.dec.{i}", rng, cfg.causal_decoder) for i in range(cfg.n_dec)]
        self.dec_out = Linear(params, f"{prefix}.dec.out", self.d_h, self.d_h, rng)
        # inverse transform as real operators on row-packed data
        n_rb, m_c, n_rx = p.n_rb, p.m_c, geo.n_rx
        self._left = real_block(np.kron(dft_matrix(n_rb), dft_matrix(m_c)).conj())
        self._right = dft_matrix(n_rx).conj()

    def _block(self, params, prefix, rng, causal):
        return {
            "attn": MultiHeadAttention(params, f"{prefix}.attn", self.d_h, self.cfg.n_heads, rng, causal=causal),
            "ln1": LayerNorm(params, f"{prefix}.ln1", self.d_h),
            "tffl": TFFL(params, f"{prefix}.tffl", self.n_d, self.d_h, self.cfg.d_f, rng, self.cfg.p_drop),
            "ln2": LayerNorm(params, f"{prefix}.ln2", self.d_h),
        }

    @staticmethod
    def _run(blk, x, training, rng):
        x = blk["ln1"](x + blk["attn"](x))
        return blk["ln2"](x + blk["tffl"](x, training, rng))

    def sparse_input(self, g: np.ndarray) -> np.ndarray:
        """``(B, N_RB*M_c, N_Rx)`` complex to row-packed ``(B, 2N_d, d_h)``."""
        p = self.geo.pilot
        return pack_rows(codec.sparsify(g, p.n_rb, p.m_c))

    def encode(self, g: np.ndarray, training: bool = False, rng=None) -> Tensor:
        """Unquantized codewords ``(B, M)``."""
        x = Tensor(self.sparse_input(g))
        for blk in self.enc:
            x = self._run(blk, x, training, rng)
        return self.enc_out(ops.reshape(x, (x.shape[0], -1)))

    def quantize(self, v: Tensor) -> Tensor:
        b = self.cfg.bits_per_element
        return ops.straight_through(v, lambda a: codec.quantize_dequantize(a, b))

    def decode_sparse(self, v, training: bool = False, rng=None) -> Tensor:
        """Row-packed angle-delay reconstruction ``(B, 2N_d, d_h)``."""
        x = self.dec_in(v)
        x = ops.reshape(x, (x.shape[0], 2 * self.n_d, self.d_h))
        for blk in self.dec:
            x = self._run(blk, x, training, rng)
        return self.dec_out(x)

    def desparsify(self, h: Tensor) -> Tensor:
        """Row-packed ``(B, 2N_d, M_c*N_Rx)`` to row-packed ``(B, 2*N_RB*M_c, N_Rx)``."""
        p = self.geo.pilot
        bsz = h.shape[0]
        rows = p.n_rb * p.m_c
        x = ops.reshape(h, (bsz, 2 * rows, self.geo.n_rx))
        x = ops.matmul(self._left, x)
        re, im = x[:, :rows], x[:, rows:]
        re, im = cmatmul_right(re, im, self._right)
        return ad.concat([re, im], axis=1)

    def __call__(self, g: np.ndarray, training: bool = False, rng=None, quantize: bool = True):
        """Encode, quantize, decode. Returns ``(sparse_out, port_out)``, both row-packed."""
        v = self.encode(g, training, rng)
        if quantize:
            v = self.quantize(v)
        hs = self.decode_sparse(v, training, rng)
        return hs, self.desparsify(hs)

    # frame-level interface
    def encode_frames(self, g: np.ndarray) -> list:
        v = self.encode(g).data
        return [codec.quantize(row, self.cfg.n_bit) for row in v]

    def decode_frames(self, frames) -> np.ndarray:
        v = np.stack([codec.dequantize(f) for f in frames])
        if v.shape[1] != self.cfg.codeword_len:
            raise codec.FrameError(f"frame carries M={v.shape[1]}, model expects {self.cfg.codeword_len}")
        return unpack_rows(self.desparsify(self.decode_sparse(Tensor(v))))


# ---------------------------------------------------------------------------- shape matching

def shape_match_index(geo: Geometry) -> tuple[np.ndarray, np.ndarray]:
    """For every (k, l, n) the CSI-RS slot and RB it copies, each ``(K, L, N)``.

    Comb bin ``j = l*N + n`` is subcarrier ``j * N_tc``, inside RB
    ``j * N_tc // M_sc``; each RB therefore feeds ``M_sc / N_tc`` bins. The
    slot is the CSI-RS occasion nearest the sounding.
    """
    p = geo.pilot
    if (p.n_rb * p.m_sc) // p.n_tc != geo.n_freq:
        raise ConfigError("N_RB*M_sc/N_tc must equal L*N")
    rb = geo.tt.ul_subcarriers // p.m_sc  # (L, N)
    slot = geo.tt.nearest_csirs()  # (K, L)
    K = p.k_sound
    return np.broadcast_to(slot[:, :, None], (K,) + rb.shape).copy(), np.broadcast_to(rb, (K,) + rb.shape).copy()


def lift_matrices(geo: Geometry, zero_fill: bool = False) -> np.ndarray:
    """Per CSI-RS slot the ``N_Tx x M_c`` complex port-to-antenna map.

    Default is the adjoint of the slot's beam selection (conjugate DFT beams),
    summed over the subcarriers inside the RB. ``zero_fill`` instead writes
    each port's value onto its beam index and leaves other antennas zero.
    """
    p = geo.pilot
    w = tx_beams(geo.n_tx)
    out = np.zeros((p.n_dt, geo.n_tx, p.m_c), dtype=np.complex128)
    for s in range(p.n_dt):
        _, tx = beam_indices(p, geo.n_tx, s)
        if zero_fill:
            out[s, tx, np.arange(p.m_c)] = 1.0
        else:
            out[s] = w[:, tx].conj()
    return out


class ShapeMatch:
    """Differentiable bridge from DL feedback to the UL (K, L, N) layout."""

    def __init__(self, geo: Geometry, zero_fill: bool = False):
        self.geo = geo
        p = geo.pilot
        slot, rb = shape_match_index(geo)
        self.flat_index = (slot * p.n_rb + rb).reshape(-1)
        lifts = lift_matrices(geo, zero_fill)
        self.ops = np.stack([real_block(lifts[s]) for s in slot.reshape(-1)])  # (KLN, 2N_Tx, 2M_c)

    def pack_feedback(self, g: np.ndarray) -> np.ndarray:
        """Complex ``(B, N_dt, N_RB, M_c, N_Rx)`` to ``(B, N_dt*N_RB, 2M_c, N_Rx)``."""
        b, n_dt, n_rb = g.shape[:3]
        x = pack_rows(g)
        return x.reshape(b, n_dt * n_rb, *x.shape[-2:])

    def from_tmcfn(self, x: Tensor, batch: int) -> Tensor:
        """Row-packed TMCFN output ``(B*N_dt, 2*N_RB*M_c, N_Rx)`` to the packed slot/RB layout."""
        p = self.geo.pilot
        x = ops.reshape(x, (batch, p.n_dt, 2, p.n_rb, p.m_c, self.geo.n_rx))
        x = ops.transpose(x, (0, 1, 3, 2, 4, 5))
        return ops.reshape(x, (batch, p.n_dt * p.n_rb, 2 * p.m_c, self.geo.n_rx))

    def __call__(self, fb) -> Tensor:
        """Packed ``(B, N_dt*N_RB, 2M_c, N_Rx)`` to packed ``(B, KLN, 2N_Tx, N_Rx)``."""
        x = ops.take(ad.as_tensor(fb), self.flat_index, axis=1)
        return ops.matmul(self.ops, x)


def shape_match(g_fb: np.ndarray, geo: Geometry, zero_fill: bool = False) -> np.ndarray:
    """Complex ``(N_dt, N_RB, M_c, N_Rx)`` feedback to complex ``(K, L, N, N_Tx, N_Rx)``."""
    sm = ShapeMatch(geo, zero_fill)
    out = sm(sm.pack_feedback(g_fb[None])).data[0]
    p = geo.pilot
    return unpack_rows(out).reshape(p.k_sound, p.n_sub, p.n_comb, geo.n_tx, geo.n_rx)


# ---------------------------------------------------------------------------- JUDCEN

class JUDCEN:
    """Fuses shape-matched DL feedback with UL sounding features.

    Per (k, l, n) position: real-pack and concatenate both features to width
    ``2 N_Tx (N_Rx + M_s)``, linear + batch norm + SELU down to
    ``2 N_Tx N_Rx``, view as an ``(N_Rx, N_Tx, 2)`` antenna plane, lift the
    trailing axis to ``d_f``, run ``n_sab`` SABs and project back to 2.
    Output ``(B, KLN, N_Rx, N_Tx, 2)``.
    """

    def __init__(self, params, geo: Geometry, cfg: ModelConfig, rng, prefix: str = "judcen"):
        self.geo = geo
        m_s = geo.pilot.m_s
        d_in = 2 * geo.n_tx * (geo.n_rx + m_s)
        d_hid = 2 * geo.n_tx * geo.n_rx
        self.pre = Linear(params, f"{prefix}.pre.fc", d_in, d_hid, rng)
        self.bn = BatchNorm(params, f"{prefix}.pre.bn", d_hid)
        self.up = Linear(params, f"{prefix}.up", 2, cfg.d_f, rng)
        self.sabs = [SAB(params, f"{prefix}.sab.{i}", cfg.d_f, rng) for i in range(cfg.n_sab)]
        self.down = Linear(params, f"{prefix}.down", cfg.d_f, 2, rng)

    def __call__(self, dl_packed, ul_packed: np.ndarray, training: bool = False) -> Tensor:
        """``dl_packed (B, KLN, 2N_Tx, N_Rx)``, ``ul_packed (B, KLN, 2N_Tx, M_s)``."""
        dl_packed = ad.as_tensor(dl_packed)
        b, q = dl_packed.shape[:2]
        x = ad.concat([ops.reshape(dl_packed, (b, q, -1)), Tensor(ul_packed.reshape(b, q, -1))], axis=-1)
        x = ad.selu(self.bn(self.pre(x), training))
        x = self.up(ops.reshape(x, (b, q, self.geo.n_rx, self.geo.n_tx, 2)))
        for sab in self.sabs:
            x = sab(x)
        return self.down(x)


def pack_ul(gu: np.ndarray) -> np.ndarray:
    """Complex ``(B, K, L, N, N_Tx, M_s)`` to ``(B, KLN, 2N_Tx, M_s)``."""
    b = gu.shape[0]
    x = gu.reshape(b, -1, *gu.shape[-2:])
    return pack_rows(x)


# ---------------------------------------------------------------------------- MCPN

class MCPN:
    """Selective-SSM predictor over the angle-delay representation.

    The input ``(B, KLN, N_Rx, N_Tx, 2)`` is moved to the angle-delay domain
    by unitary DFTs along the stacked-subband frequency axis and both antenna
    axes. Real and imaginary parts, then ``k``, then ``(l, n)`` form a
    sequence of length ``N_sq = 2 K L N`` with ``N_Tx N_Rx`` features. After
    ``n_mamba`` blocks a linear map along the sequence axis and one along the
    features produce the ``2 N_tr L N`` output positions, which are mapped
    back by the inverse DFTs.
    """

    def __init__(self, params, geo: Geometry, cfg: ModelConfig, rng, prefix: str = "mcpn"):
        self.geo = geo
        p = geo.pilot
        d = geo.n_tx * geo.n_rx
        self.n_out = 2 * p.n_tr * geo.n_freq
        self.blocks = [MambaBlock(params, f"{prefix}.block.{i}", d, cfg.d_f, cfg.n_state, rng)
                       for i in range(cfg.n_mamba)]
        self.ln = LayerNorm(params, f"{prefix}.ln_out", d)
        self.head_seq = Linear(params, f"{prefix}.head.seq", geo.n_sq, self.n_out, rng)
        self.head_feat = Linear(params, f"{prefix}.head.feat", d, d, rng)
        self.f_freq = dft_matrix(geo.n_freq)
        self.f_space = np.kron(dft_matrix(geo.n_rx), dft_matrix(geo.n_tx))

    def to_sequence(self, x) -> Tensor:
        """``(B, KLN, N_Rx, N_Tx, 2)`` to the angle-delay sequence ``(B, N_sq, N_Tx N_Rx)``."""
        x = ad.as_tensor(x)
        p, geo = self.geo.pilot, self.geo
        b = x.shape[0]
        x = ops.reshape(x, (b, p.k_sound, geo.n_freq, geo.n_rx * geo.n_tx, 2))
        re, im = x[..., 0], x[..., 1]
        re, im = cmatmul_left(self.f_freq, re, im)
        re, im = cmatmul_right(re, im, self.f_space)
        seq = ad.concat([re, im], axis=1)  # (B, 2K, LN, S)
        return ops.reshape(seq, (b, geo.n_sq, geo.n_rx * geo.n_tx))

    def __call__(self, x) -> tuple[Tensor, Tensor]:
        """Returns ``(re, im)`` each ``(B, N_tr, L*N, N_Rx*N_Tx)`` in the antenna-frequency domain."""
        h = self.to_sequence(x)
        for blk in self.blocks:
            h = blk(h)
        h = self.ln(h)
        h = ops.swapaxes(self.head_seq(ops.swapaxes(h, 1, 2)), 1, 2)  # (B, n_out, S)
        h = self.head_feat(h)
        b = h.shape[0]
        p, geo = self.geo.pilot, self.geo
        h = ops.reshape(h, (b, 2, p.n_tr, geo.n_freq, geo.n_rx * geo.n_tx))
        re, im = h[:, 0], h[:, 1]
        re, im = cmatmul_left(self.f_freq.conj().T, re, im)
        return cmatmul_right(re, im, self.f_space.conj().T)


def target_split(hdt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex ``(B, N_tr, L, N, N_Tx, N_Rx)`` to the MCPN output layout ``(B, N_tr, LN, N_Rx*N_Tx)``."""
    b, n_tr, L, N, n_tx, n_rx = hdt.shape
    x = np.swapaxes(hdt, -1, -2).reshape(b, n_tr, L * N, n_rx * n_tx)
    return x.real.copy(), x.imag.copy()


def prediction_to_complex(re, im, geo: Geometry) -> np.ndarray:
    """Inverse of :func:`target_split`."""
    re = re.data if isinstance(re, Tensor) else re
    im = im.data if isinstance(im, Tensor) else im
    p = geo.pilot
    x = (re + 1j * im).reshape(re.shape[0], p.n_tr, p.n_sub, p.n_comb, geo.n_rx, geo.n_tx)
    return np.swapaxes(x, -1, -2)


def judcen_to_complex(x, geo: Geometry) -> np.ndarray:
    """JUDCEN output ``(B, KLN, N_Rx, N_Tx, 2)`` to complex ``(B, K, L, N, N_Tx, N_Rx)``."""
    x = x.data if isinstance(x, Tensor) else x
    p = geo.pilot
    c = (x[..., 0] + 1j * x[..., 1]).reshape(x.shape[0], p.k_sound, p.n_sub, p.n_comb, geo.n_rx, geo.n_tx)
    return np.swapaxes(c, -1, -2)


# ---------------------------------------------------------------------------- HASCAN

class HASCAN:
    """TMCFN -> shape matching -> JUDCEN -> MCPN, sharing one parameter store.

    ``branch`` selects the ablations: ``"both"`` (default), ``"ul"`` zeroes the
    DL feedback branch and ``"dl"`` zeroes the UL features before fusion.
    """

    def __init__(self, geo: Geometry, cfg: ModelConfig, seed: int = 0, params: ParamStore | None = None):
        self.geo, self.cfg = geo, cfg
        self.params = params if params is not None else ParamStore()
        rng = np.random.default_rng(seed)
        self.tmcfn = TMCFN(self.params, geo, cfg, rng)
        self.judcen = JUDCEN(self.params, geo, cfg, rng)
        self.mcpn = MCPN(self.params, geo, cfg, rng)
        self.sm = ShapeMatch(geo, cfg.zero_fill_lift)

    def feedback(self, gd: np.ndarray, mode: str, training: bool = False, rng=None, quantize: bool = True):
        """Packed fed-back DL features ``(B, N_dt*N_RB, 2M_c, N_Rx)``.

        ``mode="perfect"`` passes the UE's feature through unchanged,
        ``mode="tmcfn"`` runs the autoencoder on every slot.
        """
        b = gd.shape[0]
        if mode == "perfect":
            return Tensor(self.sm.pack_feedback(gd))
        p = self.geo.pilot
        flat = gd.reshape(b * p.n_dt, p.n_rb * p.m_c, self.geo.n_rx)
        _, port = self.tmcfn(flat, training, rng, quantize=quantize)
        return self.sm.from_tmcfn(port, b)

    def __call__(self, gd: np.ndarray, gu: np.ndarray, mode: str = "tmcfn", training: bool = False,
                 rng=None, branch: str = "both", quantize: bool = True):
        fb = self.feedback(gd, mode, training, rng, quantize)
        dl = self.sm(fb)
        ul = pack_ul(gu)
        if branch == "ul":
            dl = dl * 0.0
        elif branch == "dl":
            ul = np.zeros_like(ul)
        elif branch != "both":
            raise ValueError(f"unknown branch {branch!r}")
        hu = self.judcen(dl, ul, training)
        return self.mcpn(hu)

    def predict(self, gd, gu, mode: str = "tmcfn", branch: str = "both", batch: int = 64) -> np.ndarray:
        """Eval-mode complex predictions ``(B, N_tr, L, N, N_Tx, N_Rx)``."""
        out = []
        for i in range(0, gd.shape[0], batch):
            re, im = self(gd[i:i + batch], gu[i:i + batch], mode, False, None, branch)
            out.append(prediction_to_complex(re, im, self.geo))
        return np.concatenate(out)


def expected_parameter_names(cfg: ModelConfig) -> list[str]:
    """Every learnable tensor the HASCAN pipeline must own, by hierarchical name."""
    names = []

    def lin(prefix, bias=True):
        names.extend([f"{prefix}.w"] + ([f"{prefix}.b"] if bias else []))

    def ln(prefix):
        names.extend([f"{prefix}.gamma", f"{prefix}.beta"])

    def tm_block(prefix):
        for i in range(cfg.n_heads):
            names.extend([f"{prefix}.attn.wq.{i}", f"{prefix}.attn.wk.{i}", f"{prefix}.attn.wv.{i}"])
        names.append(f"{prefix}.attn.wo")
        ln(f"{prefix}.ln1")
        for g in ("g1", "g2", "g3", "g4"):
            lin(f"{prefix}.tffl.{g}")
        ln(f"{prefix}.ln2")

    for i in range(cfg.n_enc):
        tm_block(f"tmcfn.enc.{i}")
    lin("tmcfn.enc.fc")
    lin("tmcfn.dec.fc")
    for i in range(cfg.n_dec):
        tm_block(f"tmcfn.dec.{i}")
    lin("tmcfn.dec.out")
    lin("judcen.pre.fc")
    ln("judcen.pre.bn")
    names.extend(["judcen.pre.bn.running_mean", "judcen.pre.bn.running_var"])
    lin("judcen.up")
    for i in range(cfg.n_sab):
        pre = f"judcen.sab.{i}"
        ln(f"{pre}.ln1")
        names.extend([f"{pre}.sal.conv_w", f"{pre}.sal.conv_b"])
        ln(f"{pre}.ln2")
        lin(f"{pre}.ffl.fc1")
        lin(f"{pre}.ffl.fc2")
    lin("judcen.down")
    for i in range(cfg.n_mamba):
        pre = f"mcpn.block.{i}"
        ln(f"{pre}.ln1")
        m = f"{pre}.mamba"
        lin(f"{m}.in_proj", bias=False)
        names.extend([f"{m}.conv_w", f"{m}.conv_b", f"{m}.w_b", f"{m}.w_c", f"{m}.w_d", f"{m}.b_d", f"{m}.a_log"])
        lin(f"{m}.out_proj", bias=False)
        ln(f"{pre}.ln2")
        lin(f"{pre}.ffl.fc1")
        lin(f"{pre}.ffl.fc2")
    ln("mcpn.ln_out")
    lin("mcpn.head.seq")
    lin("mcpn.head.feat")
    return names


def audit_parameters(params: ParamStore, cfg: ModelConfig) -> dict:
    """Compare a store against :func:`expected_parameter_names`.

    Returns a dict with ``missing``, ``unexpected`` and ``nonfinite`` name lists.
    """
    expected = expected_parameter_names(cfg)
    have = list(params.names())
    return {
        "missing": [n for n in expected if n not in params],
        "unexpected": [n for n in have if n not in set(expected)],
        "duplicates": sorted({n for n in expected if expected.count(n) > 1}),
        "nonfinite": [n for n in have if not np.isfinite(params[n].data).all()],
    }


def config_dict(cfg) -> dict:
    return asdict(cfg)
