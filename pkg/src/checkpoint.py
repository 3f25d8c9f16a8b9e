# -*- coding: utf-8 -*-

import base64
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
from packaging.version import InvalidVersion, Version

from .config import ModelConfig, apply_overrides
from .corpus import Vocabulary
from .errors import CheckpointError, ConfigurationError
from .model import ModelParams
from .utils import atomic_write_text

log = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
_FLOAT_LE = np.dtype("<f8")


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    src_vocab: Optional[Vocabulary] = None
    tgt_vocab: Optional[Vocabulary] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


# --- Parameter encoding ---

def encode_array(value: np.ndarray) -> Dict[str, Any]:
    """{shape, values}: values are base64 little-endian float64, C order."""
    data = np.ascontiguousarray(value, dtype=_FLOAT_LE)
    return {"shape": list(value.shape), "values": base64.b64encode(data.tobytes()).decode("ascii")}


def decode_array(name: str, entry: Mapping[str, Any]) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        raw = base64.b64decode(entry["values"], validate=True)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Parameter {name} is malformed: {e}")
    expected = int(np.prod(shape, dtype=np.int64)) * _FLOAT_LE.itemsize
    if len(raw) != expected:
        raise CheckpointError(f"Parameter {name} holds {len(raw)} bytes, expected {expected} for shape {shape}")
    return np.frombuffer(raw, dtype=_FLOAT_LE).astype(np.float64).reshape(shape)


# --- Checkpoint files ---

def save_checkpoint(
    params: ModelParams,
    config: ModelConfig,
    path: Union[str, Path],
    src_vocab: Optional[Vocabulary] = None,
    tgt_vocab: Optional[Vocabulary] = None,
    metadata: Optional[Mapping[str, Any]] = None,
) -> Path:
    document = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "vocab": {
            "src": src_vocab.to_list() if src_vocab is not None else None,
            "tgt": tgt_vocab.to_list() if tgt_vocab is not None else None,
        },
        "metadata": dict(metadata or {}),
        "params": {name: encode_array(value) for name, value in params.values.items()},
    }
    path = atomic_write_text(path, json.dumps(document))
    log.info(f"💾 Checkpoint saved to {path} ({len(params.values)} parameters)")
    return path


def _check_version(found: Any, path: Path) -> None:
    try:
        version = Version(str(found))
    except InvalidVersion:
        raise CheckpointError(f"{path}: unreadable format_version {found!r}")
    if version.major != Version(FORMAT_VERSION).major:
        raise CheckpointError(f"{path}: checkpoint format {version} is incompatible with {FORMAT_VERSION}")


def load_checkpoint(path: Union[str, Path], attention: Optional[str] = None) -> Checkpoint:
    """
    Reads and validates a checkpoint. Passing `attention` loads the weights for
    a different attention kind; missing parameters for that kind are a
    ConfigurationError.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint {path} not found")
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path} is corrupt or truncated: {e}")
    if not isinstance(document, dict) or "params" not in document or "config" not in document:
        raise CheckpointError(f"{path} is not a checkpoint (missing config or params)")
    _check_version(document.get("format_version"), path)

    try:
        config = ModelConfig.from_dict(document["config"])
    except ConfigurationError as e:
        raise CheckpointError(f"{path}: stored config is invalid: {e}")
    if attention is not None and attention != config.attention:
        log.info(f"Loading '{config.attention}' checkpoint for '{attention}' attention")
        config = apply_overrides(config, {"attention": attention})
    config.validate()

    params = ModelParams({name: decode_array(name, entry) for name, entry in document["params"].items()})
    params.check_schema(config)

    vocab = document.get("vocab") or {}
    src_vocab = Vocabulary.from_list(vocab["src"]) if vocab.get("src") else None
    tgt_vocab = Vocabulary.from_list(vocab["tgt"]) if vocab.get("tgt") else None
    log.info(f"Checkpoint loaded from {path} (attention={config.attention})")
    return Checkpoint(config, params, src_vocab, tgt_vocab, dict(document.get("metadata") or {}))


# --- Training log ---

class TrainingLog:
    """Line-oriented JSON, one record per epoch; the whole file is rewritten atomically."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.records: List[Dict[str, Any]] = []

    def append(self, record: Mapping[str, Any]) -> None:
        self.records.append(dict(record))
        atomic_write_text(self.path, "".join(json.dumps(r) + "\n" for r in self.records))


def read_training_log(path: Union[str, Path]) -> List[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
