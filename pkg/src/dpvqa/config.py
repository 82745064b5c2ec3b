"""Run configuration: typed fields, key=value files, environment overrides."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VARIANTS = ("linguistic_only", "ling_sframe", "sframe_mac", "avgpool_mac",
            "trn_mac", "crn_mlp", "crn_mac")

ENV_PREFIX = "DPVQA_"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    variant: str = "crn_mac"
    L: int = 5                      # clips per video
    T: int = 8                      # frames per clip
    K: int = 4                      # highest relation order
    d: int = 64                     # state size
    P: int = 12                     # reasoning steps
    learning_rate: float = 1e-4
    count_learning_rate: float = 5e-5
    batch_size: int = 16
    epochs: int = 5
    seed: int = 0
    precision: str = "float32"
    corpus_dir: str = ""
    out_dir: str = ""
    trn_frames: int = 8             # sampled frames for frame-level variants
    subset_limit: int = 32
    max_question_len: int = 32
    grad_clip: float = 0.0          # 0 disables clipping
    weight_decay: float = 0.0       # 0 disables decay
    dropout: float = 0.0            # 0 disables dropout
    workers: int = 0                # reader threads; 0 reads inline

    def validated(self) -> "RunConfig":
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        cfg = dataclasses.replace(self)
        if cfg.variant == "trn_mac":
            cfg.T = 1
        if cfg.P < 1:
            raise ConfigError(f"P must be >= 1, got {cfg.P}")
        if cfg.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {cfg.batch_size}")
        if cfg.d % 2:
            raise ConfigError(f"d must be even, got {cfg.d}")
        if cfg.precision not in ("float32", "float64"):
            raise ConfigError(f"precision must be float32 or float64, got {cfg.precision!r}")
        if not 2 <= cfg.K <= max(cfg.L, cfg.trn_frames):
            raise ConfigError(f"K={cfg.K} outside 2..{max(cfg.L, cfg.trn_frames)}")
        if not 0.0 <= cfg.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {cfg.dropout}")
        return cfg

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELDS[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config_text(text: str) -> RunConfig:
    """key=value lines; blank lines and #-comments are ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def apply_env_overrides(cfg: RunConfig, environ) -> RunConfig:
    values = {}
    for name in _FIELDS:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = _coerce(name, raw)
    return dataclasses.replace(cfg, **values) if values else cfg


def config_text(cfg: RunConfig) -> str:
    """Canonical serialization: sorted key=value lines."""
    pairs = sorted(dataclasses.asdict(cfg).items())
    return "\n".join(f"{k}={v}" for k, v in pairs) + "\n"


def config_hash(cfg: RunConfig) -> bytes:
    return hashlib.sha256(config_text(cfg).encode("utf-8")).digest()
