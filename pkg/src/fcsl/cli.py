"""Command line entry point: ``fcsl generate | train | evaluate | selfcheck``.

Exit status: 0 success, 1 usage error, 2 data or compatibility error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("fcsl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(s: str) -> tuple:
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _ints(s: str) -> tuple:
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--seed", type=_seed, help="model/training seed")
    common.add_argument("--snr", type=_floats, help="test SNR list in dB, e.g. 0,5,10,15")
    common.add_argument("--bits", type=_ints, help="feedback budgets N_bit, e.g. 100,200,400")
    common.add_argument("--fc", type=_floats, help="carrier frequencies in Hz")
    common.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    common.add_argument("--out", type=Path, default=Path("fcsl_run"), help="run directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="fcsl", description="Joint UL/DL CSI acquisition experiments")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sub.add_parser("generate", parents=[common], help="write FCDG datasets")
    t = sub.add_parser("train", parents=[common], help="run the training phases")
    t.add_argument("--phase", choices=["1", "2", "3", "all"], default="all")
    sub.add_parser("evaluate", parents=[common], help="write metrics.csv")
    sub.add_parser("selfcheck", parents=[common], help="fast invariant suite")
    return p


def _limit_threads(n):
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def resolve_config(args):
    from dataclasses import replace

    from .config import ExperimentConfig, load_config

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    upd = {}
    if args.snr:
        upd["snr_db"] = args.snr
    if args.bits:
        upd["n_bit"] = args.bits
    if args.fc:
        upd["f_c"] = args.fc
    if upd:
        cfg = replace(cfg, experiment=replace(cfg.experiment, **upd))
    return cfg


def data_dir(args) -> Path:
    env = os.environ.get("FCSL_DATA_DIR")
    return Path(env) if env else args.out / "data"


def cmd_generate(cfg, args) -> int:
    from .config import manifest_entries, write_manifest
    from .data import FCDGWriter, generate
    from .experiment import make_maker

    d = data_dir(args)
    d.mkdir(parents=True, exist_ok=True)
    maker = make_maker(cfg)
    e = cfg.experiment
    jobs = [("train", e.n_train + e.n_val, e.data_seed, None)]
    jobs += [(f"test_snr{s:g}", e.n_test, e.data_seed + 1000, s) for s in e.snr_db]
    counts = {}
    for name, n, seed, snr in jobs:
        path = d / f"{name}.fcdg"
        with FCDGWriter(path, maker.grid, maker.slots, n) as w:
            generate(maker, n, seed, cfg.train.snr_mix, snr_db=snr, writer=w)
        counts[f"samples.{name}"] = n
        log.info("wrote %s (%d samples)", path, n)
    write_manifest(d / "data.manifest", manifest_entries(cfg, **counts))
    return EXIT_OK


def load_train_data(cfg, args):
    from .data import read_dataset
    from .experiment import MissingArtifactError, make_maker

    path = data_dir(args) / "train.fcdg"
    if not path.exists():
        raise MissingArtifactError(f"dataset {path} not found; create it with `fcsl generate --out {args.out}`"
                                   " (or point FCSL_DATA_DIR at an existing data directory)")
    full = read_dataset(path, make_maker(cfg))
    n = cfg.experiment.n_train
    return full.subset(slice(0, n)), full.subset(slice(n, None))


def cmd_train(cfg, args) -> int:
    from .experiment import finish_manifest, train_all

    phases = (1, 2, 3) if args.phase == "all" else (int(args.phase),)
    t0 = time.time()
    train_all(cfg, args.out, phases, data=load_train_data(cfg, args))
    finish_manifest(cfg, args.out, last_phase=max(phases))
    log.info("training done in %.1fs", time.time() - t0)
    return EXIT_OK


def cmd_evaluate(cfg, args) -> int:
    from .experiment import check_run_compat, evaluate_all, finish_manifest, write_metrics

    out = args.out
    have_models = any(Path(out).glob("hascan_b*.fcsl"))
    if not have_models:
        log.warning("no trained checkpoints in %s: evaluating classical methods only", out)
    else:
        check_run_compat(cfg, out)
    Path(out).mkdir(parents=True, exist_ok=True)
    rows = evaluate_all(cfg, out, with_models=have_models, data_dir=data_dir(args))
    write_metrics(Path(out) / "metrics.csv", rows)
    finish_manifest(cfg, out, evaluated="yes")
    for r in rows:
        print(f"{r['method']:>14s} snr={r['snr_db']:5.1f} bits={r['n_bit']:4d} "
              f"nmse={r['nmse_db']:8.3f} dB cos={r['cosine_sim']:.4f} se={r['se_bps_hz']:.3f}")
    return EXIT_OK


def cmd_selfcheck(cfg, args) -> int:
    from .selfcheck import run_selfcheck

    return run_selfcheck(args.out)


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate, "selfcheck": cmd_selfcheck}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.cmd != "selfcheck" else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        _limit_threads(args.threads)
        import numpy as np

        from .ad.store import StoreFormatError
        from .channel import ConfigError
        from .codec import FrameError
        from .data import DatasetFormatError
        from .experiment import CompatibilityError, MissingArtifactError, tune_allocator
        from .train import TrainingDivergedError
    except UsageError as e:
        print(f"fcsl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    tune_allocator()
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.cmd](cfg, args)
    except (UsageError, ConfigError) as e:
        print(f"fcsl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (MissingArtifactError, CompatibilityError, DatasetFormatError, StoreFormatError, FrameError,
            OSError) as e:
        print(f"fcsl: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"fcsl: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
