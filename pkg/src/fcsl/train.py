"""Losses, Adam and the three-phase HASCAN training schedule.

Phase I fits TMCFN alone (quantizer in the loop) to reconstruct the clean DL
equivalent channel from the UE's feature. Phase II fits JUDCEN and MCPN with
the UE's feature passed through unquantized (perfect feedback). Phase III
runs the whole chain end to end from those weights under MSE or negative
cosine similarity. Gradients cross the quantizer unchanged.

Optimizer steps use the per-sample mean of each loss, which keeps the step
size independent of the batch size. Loss curves record the per-sample mean
of the summed loss, so values compare across batch sizes as well.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import ad
from .ad import Tape, Tensor, ops
from .codec import NonFiniteCodewordError
from .data import Dataset
from .networks import HASCAN, pack_rows, target_split

log = logging.getLogger(__name__)

PHASE_PREFIX = {1: ("tmcfn.",), 2: ("judcen.", "mcpn."), 3: ("tmcfn.", "judcen.", "mcpn.")}


class TrainingDivergedError(FloatingPointError):
    """Non-finite loss during training."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-3
    batch: int = 32
    epochs_p1: int = 40
    epochs_p2: int = 9
    epochs_p3: int = 2
    seed: int = 0
    loss: str = "mse"  # Phase III criterion: "mse" or "cossim"
    snr_mix: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    p1_batch: int = 64
    lr_p3: float | None = None  # defaults to lr / 3

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.batch < 1 or self.p1_batch < 1:
            raise ValueError("batch size must be >= 1")
        if self.loss not in ("mse", "cossim"):
            raise ValueError(f"unknown loss {self.loss!r}")


# ---------------------------------------------------------------------------- losses

def _pairs(x):
    return tuple(x) if isinstance(x, (tuple, list)) else (x,)


def _check_shapes(pred, target):
    if len(pred) != len(target):
        raise ValueError(f"loss got {len(pred)} prediction parts and {len(target)} target parts")
    for p, t in zip(pred, target):
        if tuple(p.shape) != tuple(np.shape(t)):
            raise ValueError(f"loss shape mismatch: {tuple(p.shape)} vs {np.shape(t)}")


def _per_sample(x) -> Tensor:
    x = ad.as_tensor(x)
    return ops.sum(ops.reshape(x, (x.shape[0], -1)), axis=1)


def loss_mse(pred, target, reduction: str = "sum") -> Tensor:
    """Squared L2 distance per sample, summed (``"sum"``) or averaged (``"mean"``) over the batch.

    ``pred`` and ``target`` may be single tensors or matching tuples (for
    example the ``(re, im)`` pair of a complex output); every part counts.
    """
    pred, target = _pairs(pred), _pairs(target)
    _check_shapes(pred, target)
    per = None
    for p, t in zip(pred, target):
        d = ad.as_tensor(p) - t
        s = _per_sample(d * d)
        per = s if per is None else per + s
    total = ops.sum(per)
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total * (1.0 / per.shape[0])
    raise ValueError(f"unknown reduction {reduction!r}")


def loss_cossim(pred, target, reduction: str = "sum") -> Tensor:
    """Negative cosine similarity per sample over the real-packed tensors.

    A sample whose prediction has zero norm contributes 0 (with a warning).
    """
    pred, target = _pairs(pred), _pairs(target)
    _check_shapes(pred, target)
    ip = pp = None
    tt = 0.0
    for p, t in zip(pred, target):
        p = ad.as_tensor(p)
        t = np.asarray(t, dtype=np.float64)
        a, b = _per_sample(p * t), _per_sample(p * p)
        ip = a if ip is None else ip + a
        pp = b if pp is None else pp + b
        tt = tt + np.sum(t.reshape(t.shape[0], -1) ** 2, axis=1)
    if np.any(tt <= 0):
        raise ValueError("cosine loss needs non-zero target norms")
    dead = pp.data <= 0
    if dead.any():
        log.warning("cosine loss: %d zero-norm predictions contribute 0", int(dead.sum()))
    safe = pp + dead.astype(np.float64)
    cos = ip / (ops.sqrt(safe) * np.sqrt(tt))
    total = -ops.sum(cos * (~dead).astype(np.float64))
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total * (1.0 / len(tt))
    raise ValueError(f"unknown reduction {reduction!r}")


# ---------------------------------------------------------------------------- optimizer

class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.betas, self.eps = lr, betas, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------- phases

@dataclass
class Curve:
    rows: list = field(default_factory=list)  # (phase, epoch, split, loss)

    def add(self, phase, epoch, split, loss):
        self.rows.append((str(phase), int(epoch), split, float(loss)))


def phase_params(net: HASCAN, phase: int) -> list[Tensor]:
    out = []
    for pre in PHASE_PREFIX[phase]:
        out.extend(net.params.trainable(pre))
    return out


def _check_finite(loss: Tensor, phase, epoch, step):
    if not np.isfinite(loss.data).all():
        raise TrainingDivergedError(f"non-finite loss in phase {phase}, epoch {epoch}, step {step}")


def _slots(ds: Dataset, net: HASCAN):
    p = net.geo.pilot
    shape = (-1, p.n_rb * p.m_c, net.geo.n_rx)
    return ds.gd_hat.reshape(shape), ds.gd.reshape(shape)


def phase1_loss(net: HASCAN, g_in, g_ref, training=False, rng=None, reduction="sum") -> Tensor:
    _, port = net.tmcfn(g_in, training, rng, quantize=True)
    return loss_mse(port, pack_rows(g_ref), reduction)


def hascan_loss(net: HASCAN, ds: Dataset, mode: str, criterion: str = "mse", training=False, rng=None,
                reduction="sum", branch: str = "both") -> Tensor:
    pred = net(ds.gd_hat, ds.gu_hat, mode, training, rng, branch)
    target = target_split(ds.hdt)
    fn = loss_mse if criterion == "mse" else loss_cossim
    return fn(pred, target, reduction)


def evaluate_loss(fn, n: int, batch: int) -> float:
    """Per-sample mean of a summed loss evaluated in chunks."""
    total = 0.0
    for i in range(0, n, batch):
        total += float(fn(slice(i, min(i + batch, n))).data)
    return total / max(n, 1)


def run_epochs(phase, n, batch, epochs, step_fn, params, lr, rng, curve, val_fn=None, progress=None):
    opt = Adam(params, lr)
    for epoch in range(epochs):
        t0 = time.time()
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for step, i in enumerate(range(0, n - batch + 1 if n >= batch else 1, batch)):
            idx = np.sort(order[i:i + batch])
            try:
                with Tape() as tape:
                    loss = step_fn(idx)
            except NonFiniteCodewordError:
                raise TrainingDivergedError(f"non-finite codeword in phase {phase}, epoch {epoch}, step {step}") from None
            _check_finite(loss, phase, epoch, step)
            opt.zero_grad()
            tape.backward(loss)
            opt.step()
            # an overflowing update would otherwise surface later as a NaN codeword
            bad = [p.name or "?" for p in params if not np.isfinite(p.data).all()]
            if bad:
                raise TrainingDivergedError(f"non-finite parameters after update in phase {phase}, "
                                            f"epoch {epoch}, step {step}: {', '.join(bad[:3])}")
            total += float(loss.data) * len(idx)
            seen += len(idx)
        curve.add(phase, epoch, "train", total / seen)
        if val_fn is not None:
            curve.add(phase, epoch, "val", val_fn())
        if progress:
            progress(phase, epoch, curve.rows[-1], time.time() - t0)
    return opt


def train_phase1(net: HASCAN, train: Dataset, cfg: TrainConfig, curve: Curve, val: Dataset | None = None,
                 progress=None, tag="1"):
    rng = np.random.default_rng([cfg.seed, 1])
    g_in, g_ref = _slots(train, net)

    def step(idx):
        return phase1_loss(net, g_in[idx], g_ref[idx], True, rng, "mean")

    val_fn = None
    if val is not None:
        v_in, v_ref = _slots(val, net)
        val_fn = lambda: evaluate_loss(lambda s: phase1_loss(net, v_in[s], v_ref[s]), len(v_in), 256)  # noqa: E731
    run_epochs(tag, len(g_in), cfg.p1_batch, cfg.epochs_p1, step, phase_params(net, 1), cfg.lr, rng,
               curve, val_fn, progress)


def _val_hascan(net, val, mode, criterion, branch="both"):
    return lambda: evaluate_loss(lambda s: hascan_loss(net, val.subset(s), mode, criterion, branch=branch),
                                 len(val), 64)


def train_phase2(net: HASCAN, train: Dataset, cfg: TrainConfig, curve: Curve, val: Dataset | None = None,
                 progress=None, branch: str = "both", tag="2"):
    rng = np.random.default_rng([cfg.seed, 2])

    def step(idx):
        return hascan_loss(net, train.subset(idx), "perfect", "mse", True, rng, "mean", branch)

    val_fn = _val_hascan(net, val, "perfect", "mse", branch) if val is not None else None
    run_epochs(tag, len(train), cfg.batch, cfg.epochs_p2, step, phase_params(net, 2), cfg.lr, rng,
               curve, val_fn, progress)


def train_phase3(net: HASCAN, train: Dataset, cfg: TrainConfig, curve: Curve, val: Dataset | None = None,
                 progress=None, branch: str = "both", tag="3"):
    rng = np.random.default_rng([cfg.seed, 3])

    def step(idx):
        return hascan_loss(net, train.subset(idx), "tmcfn", cfg.loss, True, rng, "mean", branch)

    val_fn = _val_hascan(net, val, "tmcfn", cfg.loss, branch) if val is not None else None
    lr = cfg.lr_p3 if cfg.lr_p3 is not None else cfg.lr / 3
    run_epochs(tag, len(train), cfg.batch, cfg.epochs_p3, step, phase_params(net, 3), lr, rng,
               curve, val_fn, progress)


def train_three_phase(net: HASCAN, train: Dataset, cfg: TrainConfig, val: Dataset | None = None,
                      phases=(1, 2, 3), progress=None) -> Curve:
    curve = Curve()
    for ph in phases:
        {1: train_phase1, 2: train_phase2, 3: train_phase3}[ph](net, train, cfg, curve, val, progress=progress)
    return curve
