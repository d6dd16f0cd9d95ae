"""Fast invariant suite behind ``fcsl selfcheck``.

Every check returns ``(ok, detail)``. The suite is meant to finish well
under a minute on one core.
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path

import numpy as np

from . import ad, codec
from .ad import Tensor, ops
from .channel import GridConfig
from .config import ExperimentConfig
from .estimators import dn_refine_dl, dn_refine_ul, ls_estimate
from .networks import HASCAN, Geometry, ModelConfig, target_split
from .nn import SAB, TFFL, MambaLayer, MultiHeadAttention
from .nn.ssm import discretize_selective, ssm_convolutional, ssm_recurrent
from .pilots import PilotConfig, dft_matrix


def tiny_setup(n_bit: int = 32):
    """A shrunken grid, pilot layout and model that exercise every code path."""
    grid = GridConfig(n_tx=4, n_rx=2, n_c=24)
    pilot = PilotConfig(m_c=2, m_s=2, n_rb=2, m_sc=12, n_sub=2, n_tc=2, k_sound=2, n_dt=4, n_tr=2)
    model = ModelConfig(d_f=8, n_state=4, n_heads=2, n_mamba=1, n_bit=n_bit)
    return grid, pilot, model


def random_inputs(geo: Geometry, batch: int, rng):
    p = geo.pilot

    def c(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    gd = c(batch, p.n_dt, p.n_rb, p.m_c, geo.n_rx)
    gu = c(batch, p.k_sound, p.n_sub, p.n_comb, geo.n_tx, p.m_s)
    hdt = c(batch, p.n_tr, p.n_sub, p.n_comb, geo.n_tx, geo.n_rx)
    return gd, gu, hdt


def check_ssm_modes(n_cfg: int = 20, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cfg):
        B, T, F, N = rng.integers(1, 3), rng.integers(1, 48), rng.integers(1, 6), rng.integers(1, 6)
        h = rng.normal(size=(B, T, F))
        d = rng.uniform(0.01, 0.5, size=(B, T, F))
        a = -rng.uniform(0.5, 4.0, size=(F, N))
        bm, cm = rng.normal(size=(B, T, N)), rng.normal(size=(B, T, N))
        abar, bbar = discretize_selective(d, a, bm)
        y1 = ssm_recurrent(h, abar, bbar, cm)
        y2 = ssm_convolutional(h, abar, bbar, cm)
        y3 = ops.selective_scan(Tensor(h), Tensor(d), Tensor(a), Tensor(bm), Tensor(cm)).data
        scale = max(np.abs(y1).max(), 1e-300)
        worst = max(worst, np.abs(y1 - y2).max() / scale, np.abs(y1 - y3).max() / scale)
    return worst <= 1e-9, f"max rel err {worst:.1e}"


def _probe_loss(fn, shape, rng):
    w = rng.normal(size=shape)
    return lambda x: (fn(x) * w).sum()


def check_block_grads(seed: int = 0):
    rng = np.random.default_rng(seed)
    ps = ad.ParamStore()
    attn = MultiHeadAttention(ps, "attn", 4, 2, rng)
    tffl = TFFL(ps, "tffl", 2, 4, 6, rng, p_drop=0.0)
    sab = SAB(ps, "sab", 4, rng)
    mamba = MambaLayer(ps, "mamba", 3, 4, 3, rng)
    cases = [
        ("attention", attn, (2, 5, 4)),
        ("tffl", tffl, (2, 4, 4)),
        ("sab", sab, (2, 2, 3, 4)),
        ("mamba", mamba, (2, 6, 3)),
    ]
    worst = {}
    for name, blk, shape in cases:
        f = _probe_loss(blk, shape[:-1] + (shape[-1],), rng)
        worst[name] = ad.grad_check(f, Tensor(rng.normal(size=shape)))
    bad = {k: v for k, v in worst.items() if not v <= 1e-4}
    return not bad, " ".join(f"{k}={v:.1e}" for k, v in worst.items())


def hascan_grad_error(net: HASCAN, batch, names, max_coords: int = 6, seed: int = 0) -> float:
    """Largest finite-difference error over selected parameters of the full pipeline.

    Runs in training mode with a fixed dropout stream and the quantizer
    bypassed so the loss is smooth.
    """
    gd, gu, hdt = batch
    tre, tim = target_split(hdt)

    def loss(_):
        rng = np.random.default_rng(seed)
        re, im = net(gd, gu, "tmcfn", True, rng, quantize=False)
        d1, d2 = re - tre, im - tim
        return (d1 * d1).sum() + (d2 * d2).sum()

    worst = 0.0
    for n in names:
        worst = max(worst, ad.grad_check(loss, net.params[n], max_coords=max_coords,
                                         rng=np.random.default_rng(seed)))
    return worst


def check_hascan_grad(seed: int = 0):
    grid, pilot, model = tiny_setup()
    geo = Geometry(grid, pilot)
    net = HASCAN(geo, model, seed)
    batch = random_inputs(geo, 3, np.random.default_rng(seed))
    names = ["tmcfn.enc.fc.w", "judcen.pre.fc.w", "mcpn.block.0.mamba.a_log", "mcpn.head.seq.w"]
    err = hascan_grad_error(net, batch, names, max_coords=4, seed=seed)
    return err <= 1e-4, f"max rel err {err:.1e}"


def check_codec(seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    mses = []
    for b in (2, 4, 8):
        v = rng.normal(size=(100, 32))
        idx, vmin, z = codec.quantize_indices(v, b)
        rec = codec.reconstruct(idx, vmin, z, b)
        rho = z * 2.0 ** -b
        worst = max(worst, float(np.max(np.abs(rec - v) - rho[:, None] / 2)))
        mses.append(float(np.mean((rec - v) ** 2)))
        f = codec.quantize(v[0], 32 * b)
        if not np.array_equal(codec.BitFrame.from_bytes(f.to_bytes()).indices(), f.indices()):
            return False, f"frame round trip failed at B={b}"
    ok = worst <= 1e-12 and mses[0] > mses[1] > mses[2]
    return ok, f"excess over rho/2 {worst:.1e}, mse {mses[0]:.1e}>{mses[1]:.1e}>{mses[2]:.1e}"


def check_transforms(seed: int = 0):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(3, 8 * 8, 2)) + 1j * rng.normal(size=(3, 8 * 8, 2))
    s = codec.sparsify(g, 8, 8)
    e1 = np.abs(codec.desparsify(s, 8, 2) - g).max()
    e2 = abs(np.linalg.norm(s) - np.linalg.norm(g)) / np.linalg.norm(g)
    e3 = np.abs(dn_refine_dl(g, 8, 8, 0.0) - g).max()
    u = rng.normal(size=(3, 6 * 4, 2)) + 1j * rng.normal(size=(3, 6 * 4, 2))
    e4 = np.abs(dn_refine_ul(u, 6, 4, 0.0) - u).max()
    f = dft_matrix(12)
    e5 = np.abs(f.conj().T @ f - np.eye(12)).max()
    worst = max(e1, e2, e3, e4, e5)
    return worst <= 1e-10, f"max err {worst:.1e}"


def check_ls(seed: int = 0):
    rng = np.random.default_rng(seed)
    x = dft_matrix(8)
    g = rng.normal(size=(5, 8, 2)) + 1j * rng.normal(size=(5, 8, 2))
    err = np.abs(ls_estimate(x @ g, x, "dl") - g).max()
    return err <= 1e-12, f"noiseless LS err {err:.1e}"


def check_checkpoint_audit(seed: int = 0):
    from .experiment import CompatibilityError, Run, audit_checkpoint

    grid, pilot, model = tiny_setup()
    cfg = ExperimentConfig(grid=grid, pilot=pilot, model=model)
    with tempfile.TemporaryDirectory() as d:
        run = Run(cfg, d)
        net = run.model(model.n_bit)
        p = run.save(net, "probe.fcsl")
        audit_checkpoint(p, net.cfg, cfg)
        raw = bytearray(Path(p).read_bytes())
        raw[len(raw) // 2] ^= 0x01
        Path(p).write_bytes(bytes(raw))
        try:
            audit_checkpoint(p, net.cfg, cfg)
        except CompatibilityError:
            return True, "clean checkpoint accepted, flipped bit rejected"
    return False, "flipped bit not detected"


CHECKS = [
    ("ssm recurrent == convolutional == fused scan", check_ssm_modes),
    ("block gradients (attention, TFFL, SAB, Mamba)", check_block_grads),
    ("full HASCAN gradient, shrunken widths", check_hascan_grad),
    ("quantizer bound and frame round trip", check_codec),
    ("sparsify / DN / DFT round trips", check_transforms),
    ("noiseless LS recovery", check_ls),
    ("checkpoint digest audit", check_checkpoint_audit),
]


def run_selfcheck(out=None, stream=None) -> int:
    """Run every check, print a table and return a process exit code."""
    import sys

    stream = stream or sys.stdout
    failed = 0
    t_all = time.time()
    print(f"{'check':<48s} {'result':<6s} {'secs':>6s}  detail", file=stream)
    for name, fn in CHECKS:
        t0 = time.time()
        try:
            ok, detail = fn()
        except Exception as e:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(e).__name__}: {e}"
        failed += not ok
        print(f"{name:<48s} {'PASS' if ok else 'FAIL':<6s} {time.time() - t0:6.2f}  {detail}", file=stream)
    print(f"{len(CHECKS) - failed}/{len(CHECKS)} passed in {time.time() - t_all:.1f}s", file=stream)
    del out
    return 0 if failed == 0 else 3
