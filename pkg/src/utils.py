# -*- coding: utf-8 -*-

import logging
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np

log = logging.getLogger(__name__)

# Named random streams; every source of randomness draws from one of these.
RNG_STREAMS = ("init", "dropout", "shuffle", "data")


# --- Helper Functions ---
def atomic_write_text(path: Union[str, Path], text: str, encoding: str = "utf-8") -> Path:
    """Writes text to a temp file next to `path` and renames it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding=encoding, newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError as e:
            log.warning(f"Could not remove temporary file {tmp_name}: {e}")
        raise
    log.debug("Wrote %s (%d chars)", path, len(text))
    return path


def rng_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Splits one seed into independent counter-based (Philox) generators."""
    children = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    return {name: np.random.Generator(np.random.Philox(child)) for name, child in zip(RNG_STREAMS, children)}


def round_half_away(x: float) -> int:
    """Rounds to the nearest integer, halves away from zero (2.5 -> 3, -2.5 -> -3)."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def sanitize_label(name: str) -> str:
    """Makes a run label safe to embed in a file name."""
    name = re.sub(r'[\\/*?"<>|:\s]', "_", name)
    name = re.sub(r"[\x00-\x1f\x7f]", "", name)
    name = name.strip("._")
    return name or "_unnamed_"


def read_lines(path: Union[str, Path]) -> Sequence[str]:
    """Reads a UTF-8 text file as a list of lines without line terminators."""
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read().splitlines()
