# -*- coding: utf-8 -*-

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, fields
from importlib.util import find_spec
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import coloredlogs

from .attention import AttentionKind, DEFAULT_N, DEFAULT_WINDOW
from .errors import ConfigurationError

# Optional extras: .env loading and archive upload.
DOTENV_AVAILABLE = find_spec("dotenv") is not None
BOTO3_AVAILABLE = find_spec("boto3") is not None

if DOTENV_AVAILABLE:
    from dotenv import load_dotenv
    load_dotenv()

LOG_LEVEL = os.getenv("SDATT_LOG_LEVEL", "INFO").upper()
if LOG_LEVEL not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
    LOG_LEVEL = "INFO"
coloredlogs.install(level=LOG_LEVEL, fmt="%(asctime)s %(levelname)s %(message)s")

log = logging.getLogger(__name__)
if not DOTENV_AVAILABLE:
    log.debug("python-dotenv missing; reading settings from the process environment only")


def get_int_env(key: str, default: int) -> int:
    val = os.getenv(key)
    if val is None:
        return default
    try:
        return int(val)
    except ValueError:
        log.warning(f"Invalid value '{val}' for {key} in environment, using default value {default}.")
        return default


def get_float_env(key: str, default: float) -> float:
    val = os.getenv(key)
    if val is None:
        return default
    try:
        return float(val)
    except ValueError:
        log.warning(f"Invalid value '{val}' for {key} in environment, using default value {default}.")
        return default


# --- Configuration --- (Load from .env or use defaults)
LOG_DIR = Path(os.getenv("SDATT_LOG_DIR", "sdatt_logs"))
RUNS_DIR = Path(os.getenv("SDATT_RUNS_DIR", "sdatt_runs"))
ARCHIVE_DIR = Path(os.getenv("SDATT_ARCHIVE_DIR", "sdatt_archives"))
DEFAULT_SEED = get_int_env("SDATT_DEFAULT_SEED", 1234)
DEFAULT_MAX_WORKERS = get_int_env("SDATT_MAX_WORKERS", 1)
GRADCHECK_EPS = get_float_env("SDATT_GRADCHECK_EPS", 1e-5)

# File names inside a run directory
CHECKPOINT_FILENAME = "checkpoint.json"
TRAIN_LOG_FILENAME = "train_log.jsonl"
RUN_CONFIG_FILENAME = "config.json"


@dataclass
class ModelConfig:
    """Hyperparameters of one model. Desk-scale defaults; see FULL_SCALE."""
    src_vocab_size: int = 200
    tgt_vocab_size: int = 200
    embed_dim: int = 64
    hidden_dim: int = 128
    attention: str = AttentionKind.GLOBAL.value
    n: int = DEFAULT_N
    window: int = DEFAULT_WINDOW
    linear_sdc_support: bool = False
    dropout: float = 0.2
    max_len: int = 20
    seed: int = DEFAULT_SEED
    rho: float = 0.95
    eps: float = 1e-6
    lr: float = 1.0
    batch_size: int = 16
    epochs: int = 10
    beam_size: int = 12
    init_scale: float = 0.08
    vocab_limit: int = 200

    @property
    def kind(self) -> AttentionKind:
        return AttentionKind(self.attention)

    def validate(self) -> "ModelConfig":
        try:
            AttentionKind(self.attention)
        except ValueError:
            choices = ", ".join(k.value for k in AttentionKind)
            raise ConfigurationError(f"Unknown attention kind '{self.attention}' (choose from {choices})")
        for name in ("src_vocab_size", "tgt_vocab_size", "embed_dim", "hidden_dim", "max_len", "beam_size", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.window < 1:
            raise ConfigurationError(f"window D must be >= 1, got {self.window}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 < self.rho < 1.0 or self.eps <= 0.0:
            raise ConfigurationError(f"ADADELTA needs 0 < rho < 1 and eps > 0 (rho={self.rho}, eps={self.eps})")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelConfig":
        return apply_overrides(cls(), data)


# Published model sizes, kept for reference runs (--full-scale).
FULL_SCALE: Dict[str, Any] = {
    "embed_dim": 620,
    "hidden_dim": 1000,
    "vocab_limit": 50000,
    "max_len": 80,
    "batch_size": 80,
    "beam_size": 12,
    "n": 4,
    "window": 10,
}


def _coerce(name: str, target_type: Any, value: Any) -> Any:
    if isinstance(target_type, str):
        target_type = {"int": int, "float": float, "bool": bool, "str": str}[target_type]
    if target_type is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("1", "true", "yes", "on"):
            return True
        if isinstance(value, str) and value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"Override {name}={value!r} is not a boolean")
    if target_type is int and isinstance(value, float) and not value.is_integer():
        raise ConfigurationError(f"Override {name}={value!r} is not an integer")
    try:
        return target_type(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"Override {name}={value!r} is not a valid {target_type.__name__}")


def apply_overrides(base: ModelConfig, overrides: Mapping[str, Any]) -> ModelConfig:
    """Returns a copy of `base` with type-checked overrides applied."""
    known = {f.name: f.type for f in fields(ModelConfig)}
    values = base.to_dict()
    for key, value in overrides.items():
        if key not in known:
            raise ConfigurationError(f"Unknown config key '{key}'")
        values[key] = _coerce(key, known[key], value)
    return ModelConfig(**values)


def parse_set_option(items: Optional[list]) -> Dict[str, str]:
    """Parses repeated `--set key=value` flags."""
    result: Dict[str, str] = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        result[key.strip()] = value.strip()
    return result


def load_run_config(
    config_path: Optional[Union[str, Path]],
    overrides: Optional[Mapping[str, Any]] = None,
    full_scale: bool = False,
) -> ModelConfig:
    """File values, then full-scale preset, then command-line overrides."""
    model_config = ModelConfig()
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigurationError(f"Config file {path} not found")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must hold one JSON object")
        model_config = apply_overrides(model_config, data)
        log.info("Loaded model config from %s (%d keys)", path, len(data))
    if full_scale:
        model_config = apply_overrides(model_config, FULL_SCALE)
        log.info("Applied full-scale preset")
    if overrides:
        model_config = apply_overrides(model_config, overrides)
    return model_config.validate()
