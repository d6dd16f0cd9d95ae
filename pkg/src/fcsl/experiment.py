"""Desk-scale experiment driver shared by the CLI and the acceptance suite.

Run layout under an output directory::

    config.ini                 resolved configuration
    phase1_b{N}.fcsl(+.manifest)   TMCFN after Phase I, one per feedback budget
    phase2.fcsl(+.manifest)        JUDCEN + MCPN after Phase II
    hascan_b{N}.fcsl(+.manifest)   end-to-end model after Phase III (MSE)
    hascan_cossim_b{N}.fcsl        Phase III under the cosine loss (largest budget)
    losses.csv                 phase, epoch, split, loss
    metrics.csv                one row per (method, sweep point)
    run.manifest               config, seed, code version and checkpoint digests
"""

from __future__ import annotations

import csv
import hashlib
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ad import load_params, save_params
from .ad.store import StoreFormatError
from .config import (ExperimentConfig, compat_diff, manifest_entries, read_manifest, sha256_file,
                     write_config, write_manifest)
from .data import Dataset, SampleMaker, generate, read_dataset
from .estimators import lce_baseline, mmse_type2_baseline, type2_feedback
from .metrics import cosine_similarity, ezf_spectral_efficiency, nmse_db
from .networks import HASCAN, Geometry, audit_parameters, expected_parameter_names
from .train import Curve, train_phase1, train_phase2, train_phase3

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["experiment_id", "snr_db", "n_bit", "f_c_hz", "method", "nmse_db", "cosine_sim",
                  "se_bps_hz", "wall_seconds"]
LOSS_COLUMNS = ["phase", "epoch", "split", "loss"]


class CompatibilityError(RuntimeError):
    """Checkpoint or dataset does not match the configuration."""


class MissingArtifactError(FileNotFoundError):
    """A required dataset or checkpoint is absent."""


def tune_allocator() -> None:
    """Keep large numpy temporaries on the heap instead of fresh mmaps (glibc only).

    Training allocates and frees many arrays of tens of megabytes per step;
    returning them to the kernel every time dominates the runtime.
    """
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, (1 << 31) - 1)  # M_TRIM_THRESHOLD
        libc.mallopt(-2, 256 << 20)  # M_TOP_PAD
    except (OSError, AttributeError):
        pass


def experiment_id(cfg: ExperimentConfig) -> str:
    text = "".join(f"{k}={v}\n" for k, v in manifest_entries(cfg).items())
    return hashlib.sha1(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------- data

def make_maker(cfg: ExperimentConfig, f_c: float | None = None) -> SampleMaker:
    grid = cfg.grid if f_c is None else replace(cfg.grid, f_c=f_c)
    return SampleMaker(grid, cfg.pilot, cfg.profile(f_c))


def train_val(cfg: ExperimentConfig, maker: SampleMaker | None = None) -> tuple[Dataset, Dataset]:
    """Training and validation sets: consecutive slices of one seeded stream with mixed SNRs."""
    maker = maker or make_maker(cfg)
    e = cfg.experiment
    full = generate(maker, e.n_train + e.n_val, e.data_seed, cfg.train.snr_mix)
    return full.subset(slice(0, e.n_train)), full.subset(slice(e.n_train, None))


def test_set(cfg: ExperimentConfig, snr_db: float, f_c: float | None = None, data_dir=None) -> Dataset:
    """Test drops are shared across SNR points (paired noise streams).

    A matching ``test_snr{snr}.fcdg`` under ``data_dir`` is read instead of
    regenerating; both routes yield the same samples.
    """
    if data_dir is not None and f_c is None:
        path = Path(data_dir) / f"test_snr{snr_db:g}.fcdg"
        if path.exists():
            ds = read_dataset(path, make_maker(cfg))
            if len(ds) == cfg.experiment.n_test:
                return ds
            log.warning("%s holds %d samples, expected %d: regenerating", path, len(ds), cfg.experiment.n_test)
    return generate(make_maker(cfg, f_c), cfg.experiment.n_test, cfg.experiment.data_seed + 1000,
                    snr_db=snr_db)


def drop_set(cfg: ExperimentConfig) -> Dataset:
    e = cfg.experiment
    return generate(make_maker(cfg), e.n_drops * e.n_ue, e.data_seed + 2000, snr_db=e.eval_snr_db)


# ---------------------------------------------------------------------------- checkpoints

@dataclass
class Run:
    cfg: ExperimentConfig
    out: Path

    def __post_init__(self):
        self.out = Path(self.out)
        self.geo = Geometry(self.cfg.grid, self.cfg.pilot)

    def path(self, name: str) -> Path:
        return self.out / name

    def model(self, n_bit: int) -> HASCAN:
        return HASCAN(self.geo, replace(self.cfg.model, n_bit=n_bit), seed=self.cfg.seed)

    def save(self, net: HASCAN, name: str, prefixes=("",), **extra) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        state = {k: v for k, v in net.params.state().items() if k.startswith(tuple(prefixes))}
        p = self.path(name)
        save_params(p, state)
        write_manifest(str(p) + ".manifest", manifest_entries(
            self.cfg, model_n_bit=net.cfg.n_bit, prefixes=",".join(prefixes), sha256=sha256_file(p), **extra))
        return p

    def load(self, net: HASCAN, name: str, prefixes=("",)) -> list[str]:
        """Load a checkpoint into ``net`` after digest, compatibility and name audits."""
        p = self.path(name)
        if not p.exists():
            raise MissingArtifactError(f"checkpoint {p} not found; run `fcsl train` for the earlier phase first")
        state = audit_checkpoint(p, net.cfg, self.cfg, prefixes)
        loaded = []
        for pre in prefixes:
            loaded += net.params.load_state(state, prefix=pre, strict=True)
        return loaded


def audit_checkpoint(path, model_cfg, cfg: ExperimentConfig | None = None, prefixes=("",)) -> dict:
    """Digest, manifest and parameter-name audit of one checkpoint; returns its arrays.

    Raises :class:`CompatibilityError` on any mismatch (including a single
    flipped bit, which changes the recorded SHA-256).
    """
    path = Path(path)
    man_path = Path(str(path) + ".manifest")
    if not man_path.exists():
        raise CompatibilityError(f"{path}: manifest missing")
    man = read_manifest(man_path)
    digest = sha256_file(path)
    if man.get("sha256") != digest:
        raise CompatibilityError(f"{path}: content digest {digest[:12]} does not match manifest "
                                 f"{man.get('sha256', '?')[:12]}")
    if cfg is not None:
        diff = compat_diff(man, cfg, sections=("grid", "pilot"))
        mdiff = [k for k in ("d_f", "n_state", "n_heads", "n_enc", "n_dec", "n_sab", "n_mamba", "bits_per_element")
                 if man.get(f"model.{k}") != str(getattr(model_cfg, k))]
        if diff or mdiff:
            raise CompatibilityError(f"{path}: incompatible with config: " + "; ".join(diff + [f"model.{k}" for k in mdiff]))
    try:
        state = load_params(path)
    except StoreFormatError as e:
        raise CompatibilityError(str(e)) from None
    expected = [n for n in expected_parameter_names(model_cfg) if n.startswith(tuple(prefixes))]
    missing = [n for n in expected if n not in state]
    unexpected = [n for n in state if n not in set(expected)]
    nonfinite = [n for n, a in state.items() if not np.isfinite(a).all()]
    if missing or unexpected or nonfinite:
        raise CompatibilityError(f"{path}: parameter audit failed (missing {missing[:3]}, "
                                 f"unexpected {unexpected[:3]}, non-finite {nonfinite[:3]})")
    return state


# ---------------------------------------------------------------------------- training

def _progress(tag, epoch, row, secs):
    log.info("phase %s epoch %d %s loss %.4f (%.1fs)", row[0], epoch, row[2], row[3], secs)


def train_all(cfg: ExperimentConfig, out, phases=(1, 2, 3), data: tuple[Dataset, Dataset] | None = None,
              progress=_progress) -> Curve:
    """Run the requested phases, loading earlier phases from ``out`` when needed."""
    run = Run(cfg, out)
    run.out.mkdir(parents=True, exist_ok=True)
    write_config(cfg, run.path("config.ini"))
    train, val = data if data is not None else train_val(cfg)
    tc = cfg.train
    bits = sorted(cfg.experiment.n_bit)
    curve = Curve()
    if 1 in phases:
        for b in bits:
            net = run.model(b)
            train_phase1(net, train, tc, curve, val, progress=progress, tag=f"1:b{b}")
            run.save(net, f"phase1_b{b}.fcsl", ("tmcfn.",))
    if 2 in phases:
        net = run.model(bits[-1])
        train_phase2(net, train, tc, curve, val, progress=progress)
        run.save(net, "phase2.fcsl", ("judcen.", "mcpn."))
    if 3 in phases:
        jobs = [(b, "mse") for b in bits] + ([(bits[-1], "cossim")] if cfg.experiment.cossim else [])
        for b, loss in jobs:
            net = run.model(b)
            run.load(net, f"phase1_b{b}.fcsl", ("tmcfn.",))
            run.load(net, "phase2.fcsl", ("judcen.", "mcpn."))
            report = audit_parameters(net.params, net.cfg)
            if any(report.values()):
                raise CompatibilityError(f"preload audit failed: {report}")
            train_phase3(net, train, replace(tc, loss=loss), curve, val, progress=progress, tag=f"3:b{b}:{loss}")
            run.save(net, model_name(b, loss), ("",), loss=loss)
    append_losses(run.path("losses.csv"), curve)
    return curve


def model_name(n_bit: int, loss: str = "mse") -> str:
    return f"hascan_b{n_bit}.fcsl" if loss == "mse" else f"hascan_cossim_b{n_bit}.fcsl"


def append_losses(path, curve: Curve) -> None:
    new = not Path(path).exists()
    with open(path, "a", newline="") as f:
        w = csv.writer(f)
        if new:
            w.writerow(LOSS_COLUMNS)
        w.writerows(curve.rows)


# ---------------------------------------------------------------------------- evaluation

def predict(method: str, ds: Dataset, run: Run | None, n_bit: int, models: dict) -> np.ndarray:
    """Complex predictions ``(S, N_tr, L, N, N_Tx, N_Rx)`` for one method."""
    cfg = run.cfg
    p, tt, n_rx = cfg.pilot, run.geo.tt, cfg.grid.n_rx
    if method == "lce":
        return np.stack([lce_baseline(g, None, p, tt, n_rx) for g in ds.gu_hat])
    if method == "mmse_type2":
        return np.stack([mmse_type2_baseline(gu, type2_feedback(gd, n_bit), p, tt, n_rx, v)
                         for gd, gu, v in zip(ds.gd_hat, ds.gu_hat, ds.var_ul)])
    if method == "perfect_csi":
        return ds.hdt.copy()
    branch = {"hascan": "both", "hascan_cossim": "both", "hascan_u": "ul", "hascan_d": "dl"}[method]
    key = (n_bit, "cossim" if method == "hascan_cossim" else "mse")
    if key not in models:
        net = run.model(n_bit)
        run.load(net, model_name(*key))
        models[key] = net
    return models[key].predict(ds.gd_hat, ds.gu_hat, "tmcfn", branch)


def spectral_efficiency(h_hat: np.ndarray, ds: Dataset, n_ue: int, snr_db: float) -> float:
    """Mean EZF sum rate over drops of ``n_ue`` consecutive samples."""
    n_drops = len(ds) // n_ue
    per = []
    for d in range(n_drops):
        sl = slice(d * n_ue, (d + 1) * n_ue)
        shp = (n_ue, -1) + ds.hdt.shape[-2:]
        per.append(ezf_spectral_efficiency(h_hat[sl].reshape(shp), ds.hdt[sl].reshape(shp), snr_db))
    return float(np.mean(per))


def sweep_points(cfg: ExperimentConfig) -> list[tuple[float, int, float]]:
    """Unique (snr, n_bit, f_c) points: the SNR sweep at the largest budget and base carrier,
    the budget sweep and the carrier sweep at the evaluation SNR."""
    e = cfg.experiment
    top, fc0 = max(e.n_bit), cfg.grid.f_c
    pts = [(float(s), top, fc0) for s in e.snr_db]
    pts += [(float(e.eval_snr_db), int(b), fc0) for b in e.n_bit]
    pts += [(float(e.eval_snr_db), top, float(f)) for f in e.f_c]
    seen, out = set(), []
    for p in pts:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def _needs_model(method):
    return method.startswith("hascan")


def evaluate_all(cfg: ExperimentConfig, out, with_models: bool = True, data_dir=None) -> list[dict]:
    """Metric rows for every (method, sweep point); SE at the evaluation point only."""
    run = Run(cfg, out)
    eid = experiment_id(cfg)
    e = cfg.experiment
    methods = [m for m in e.methods if with_models or not _needs_model(m)]
    extra_se = ["perfect_csi"] + (["hascan_cossim"] if e.cossim and with_models else [])
    models: dict = {}
    rows = []
    cache: dict = {}
    for snr, bits, fc in sweep_points(cfg):
        key = (snr, None if fc == cfg.grid.f_c else fc)
        if key not in cache:
            cache[key] = test_set(cfg, snr, None if fc == cfg.grid.f_c else fc, data_dir)
        ds = cache[key]
        for m in methods:
            t0 = time.time()
            h = predict(m, ds, run, bits, models)
            rows.append(dict(experiment_id=eid, snr_db=snr, n_bit=bits, f_c_hz=fc, method=m,
                             nmse_db=nmse_db(h, ds.hdt), cosine_sim=cosine_similarity(h, ds.hdt),
                             se_bps_hz=float("nan"), wall_seconds=time.time() - t0))
    # transmission metric on multi-UE drops at the evaluation point
    drops = drop_set(cfg)
    top = max(e.n_bit)
    for m in [x for x in ("perfect_csi", "hascan", "hascan_cossim", "lce", "mmse_type2")
              if x in methods or x in extra_se]:
        t0 = time.time()
        h = predict(m, drops, run, top, models)
        se = spectral_efficiency(h, drops, e.n_ue, e.eval_snr_db)
        rows.append(dict(experiment_id=eid, snr_db=float(e.eval_snr_db), n_bit=top, f_c_hz=cfg.grid.f_c,
                         method=m if m in ("perfect_csi", "hascan_cossim") else f"{m}",
                         nmse_db=nmse_db(h, drops.hdt), cosine_sim=cosine_similarity(h, drops.hdt),
                         se_bps_hz=se, wall_seconds=time.time() - t0, _drops=True))
    return rows


def write_metrics(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=METRIC_COLUMNS + ["set"])
        w.writeheader()
        for r in rows:
            r = dict(r)
            r["set"] = "drops" if r.pop("_drops", False) else "test"
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    for r in rows:
        for k in ("snr_db", "f_c_hz", "nmse_db", "cosine_sim", "se_bps_hz", "wall_seconds"):
            r[k] = float(r[k])
        r["n_bit"] = int(r["n_bit"])
    return rows


def finish_manifest(cfg: ExperimentConfig, out, **extra) -> None:
    run = Run(cfg, out)
    digests = {f"sha256.{p.name}": sha256_file(p) for p in sorted(run.out.glob("*.fcsl"))}
    write_manifest(run.path("run.manifest"), manifest_entries(cfg, experiment_id=experiment_id(cfg),
                                                              **digests, **extra))


def check_run_compat(cfg: ExperimentConfig, out) -> None:
    p = Path(out) / "run.manifest"
    if not p.exists():
        for ck in Path(out).glob("hascan_b*.fcsl.manifest"):
            p = ck
            break
        else:
            return
    diff = compat_diff(read_manifest(p), cfg)
    if diff:
        raise CompatibilityError("checkpoint manifest differs from config:\n  " + "\n  ".join(diff))


def replay(out, atol: float = 1e-9) -> list[str]:
    """Re-evaluate a finished run from its manifest and compare metrics; returns mismatches."""
    from .config import config_from_manifest

    out = Path(out)
    cfg = config_from_manifest(read_manifest(out / "run.manifest"))
    old = read_metrics(out / "metrics.csv")
    new = evaluate_all(cfg, out, with_models=any(r["method"].startswith("hascan") for r in old))
    bad = []
    if len(new) != len(old):
        bad.append(f"row count {len(old)} -> {len(new)}")
    for a, b in zip(old, new):
        for k in ("nmse_db", "cosine_sim", "se_bps_hz"):
            x, y = a[k], b[k]
            if not ((np.isnan(x) and np.isnan(y)) or abs(x - y) <= atol):
                bad.append(f"{a['method']} @ snr {a['snr_db']} bits {a['n_bit']}: {k} {x} vs {y}")
    return bad
