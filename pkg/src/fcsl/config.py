"""Experiment configuration: INI-style files, manifests and compatibility checks.

A config file has one bracketed section per dataclass (``[grid]``,
``[pilot]``, ``[channel]``, ``[model]``, ``[train]``, ``[experiment]``) with
``key = value`` lines named after the dataclass fields. Lists are comma
separated. Missing keys keep their defaults; unknown keys are an error.

Manifests are flat ``section.key = value`` text files.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .channel import ChannelProfile, ConfigError, GridConfig
from .networks import ModelConfig
from .pilots import PilotConfig
from .train import TrainConfig

METHODS = ("hascan", "lce", "mmse_type2", "hascan_u", "hascan_d")


@dataclass(frozen=True)
class Sweep:
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0)
    n_bit: tuple = (100, 200, 400)
    f_c: tuple = (12e9,)
    methods: tuple = METHODS
    n_train: int = 2000
    n_val: int = 128
    n_test: int = 250
    n_drops: int = 200
    n_ue: int = 4
    eval_snr_db: float = 10.0
    cossim: bool = True
    data_seed: int = 1

    def __post_init__(self):
        for name in ("snr_db", "n_bit", "f_c", "methods"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"sweep list {name} is empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s) {bad}; expected a subset of {list(METHODS)}")
        if min(self.n_train, self.n_val, self.n_test, self.n_drops, self.n_ue) < 1:
            raise ConfigError("sample, drop and UE counts must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    pilot: PilotConfig = field(default_factory=PilotConfig)
    channel: ChannelProfile = field(default_factory=lambda: ChannelProfile(speed_kmh=1.0))
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    experiment: Sweep = field(default_factory=Sweep)
    seed: int = 0

    def profile(self, f_c: float | None = None) -> ChannelProfile:
        """Channel statistics tied to the grid (carrier and subcarrier spacing)."""
        fc = self.grid.f_c if f_c is None else f_c
        return replace(self.channel, f_c=fc, delta_f=self.grid.delta_f)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed, train=replace(self.train, seed=seed))


SECTIONS = ("grid", "pilot", "channel", "model", "train", "experiment")


def _convert(raw: str, kind: str, default):
    kind = kind.replace(" ", "")
    if raw.strip().lower() in ("none", "") and "None" in kind:
        return None
    base = kind.replace("|None", "")
    if base == "tuple":
        items = [s.strip() for s in raw.split(",") if s.strip()]
        proto = default[0] if default else ""
        if isinstance(proto, str):
            return tuple(items)
        if isinstance(proto, int) and not isinstance(proto, bool):
            return tuple(int(float(s)) for s in items)
        return tuple(float(s) for s in items)
    if base == "bool":
        v = raw.strip().lower()
        if v not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"not a boolean: {raw!r}")
        return v in ("true", "1", "yes")
    if base == "int":
        return int(float(raw))
    if base == "float":
        return float(raw)
    return raw.strip()


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _apply(obj, values: dict, section: str):
    known = {f.name: f for f in fields(obj)}
    upd = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        try:
            upd[key] = _convert(raw, str(known[key].type), getattr(obj, key))
        except ValueError as e:
            raise ConfigError(f"[{section}] {key}: {e}") from None
    return replace(obj, **upd) if upd else obj


def from_mapping(sections: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from ``{section: {key: string}}`` on top of ``base``."""
    cfg = base if base is not None else ExperimentConfig()
    parts = {}
    for sec, vals in sections.items():
        if sec == "DEFAULT":
            continue
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        parts[sec] = _apply(getattr(cfg, sec), dict(vals), sec)
    cfg = replace(cfg, **parts)
    cfg.pilot.validate(cfg.grid)
    return cfg


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as f:
            cp.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    return from_mapping({s: dict(cp[s]) for s in cp.sections()})


def to_mapping(cfg: ExperimentConfig) -> dict:
    return {sec: {f.name: _fmt(getattr(getattr(cfg, sec), f.name)) for f in fields(getattr(cfg, sec))}
            for sec in SECTIONS}


def write_config(cfg: ExperimentConfig, path) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sec, vals in to_mapping(cfg).items():
        cp[sec] = vals
    with open(path, "w") as f:
        cp.write(f)


# ---------------------------------------------------------------------------- manifests

def manifest_entries(cfg: ExperimentConfig, **extra) -> dict:
    out = {"code_version": __version__, "seed": str(cfg.seed)}
    for sec, vals in to_mapping(cfg).items():
        for k, v in vals.items():
            out[f"{sec}.{k}"] = v
    out.update({k: str(v) for k, v in extra.items()})
    return out


def write_manifest(path, entries: dict) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in entries.items()))


def read_manifest(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def config_from_manifest(entries: dict) -> ExperimentConfig:
    sections: dict = {}
    for k, v in entries.items():
        if "." in k:
            sec, key = k.split(".", 1)
            if sec in SECTIONS:
                sections.setdefault(sec, {})[key] = v
    cfg = from_mapping(sections)
    return replace(cfg, seed=int(entries.get("seed", cfg.seed)))


def compat_diff(entries: dict, cfg: ExperimentConfig, sections=("grid", "pilot", "model")) -> list[str]:
    """Fields of ``sections`` whose manifest value differs from ``cfg``."""
    now = manifest_entries(cfg)
    keys = [k for k in now if k.split(".", 1)[0] in sections]
    return [f"{k}: manifest {entries.get(k)!r} vs config {now[k]!r}" for k in keys if entries.get(k) != now[k]]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
