# -*- coding: utf-8 -*-

import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
RULE_WIDTH = 80


@dataclass
class SentenceLedger:
    """Per-sentence outcome of a translate run, keyed by 0-based input line."""
    translated: List[int] = field(default_factory=list)
    skipped: Dict[int, str] = field(default_factory=dict)
    failed: Dict[int, str] = field(default_factory=dict)

    def record(self, index: int, status: str, detail: Optional[str] = None) -> None:
        if status == "translated":
            self.translated.append(index)
        elif status == "skipped":
            self.skipped[index] = detail or "No reason given"
        elif status == "failed":
            self.failed[index] = detail or "Unknown error"
        else:
            raise ValueError(f"unknown sentence status '{status}'")

    def clear(self) -> None:
        self.translated.clear()
        self.skipped.clear()
        self.failed.clear()

    def is_empty(self) -> bool:
        return not (self.translated or self.skipped or self.failed)

    def summary_lines(self) -> List[str]:
        lines = [f"TRANSLATED SENTENCES: {len(self.translated)}"]
        for title, mark, entries in (("SKIPPED", "⚠", self.skipped), ("FAILED", "✗", self.failed)):
            if not entries:
                continue
            lines += ["", f"{title} SENTENCES:", "-" * RULE_WIDTH]
            lines += [f"{mark} line {index + 1}: {detail}" for index, detail in sorted(entries.items())]
        return lines


class RunLogger:
    """Mirrors every record of one CLI command into sdatt_<command>_<timestamp>.log."""

    def __init__(self):
        self.ledger = SentenceLedger()
        self.log_file_path: Optional[Path] = None
        self.command: Optional[str] = None
        self._handler: Optional[logging.FileHandler] = None

    def setup(self, log_level: str = "INFO", log_dir: Union[str, Path] = "sdatt_logs", command: str = "run") -> Path:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.command = command
        self.log_file_path = directory / f"sdatt_{command}_{stamp}.log"

        self._handler = logging.FileHandler(self.log_file_path, encoding="utf-8")
        self._handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root = logging.getLogger()
        root.setLevel(logging.getLevelName(log_level.upper()))
        root.addHandler(self._handler)
        return self.log_file_path

    def log_sentence_status(self, index: int, status: str, error_msg: Optional[str] = None) -> None:
        self.ledger.record(index, status, error_msg)

    def write_summary(self) -> None:
        if self.log_file_path is None or not self.log_file_path.exists():
            return
        rule = "=" * RULE_WIDTH
        block = ["", "", rule, f"RUN SUMMARY ({self.command})", rule, ""]
        if self.ledger.is_empty():
            block.append("No sentence-level events recorded.")
        else:
            block += self.ledger.summary_lines()
        block += ["", rule, ""]
        with open(self.log_file_path, "a", encoding="utf-8") as f:
            f.write("\n".join(block))

    def close(self) -> None:
        if self._handler is None:
            return
        logging.getLogger().removeHandler(self._handler)
        self._handler.close()
        self._handler = None

    def reset(self) -> None:
        self.ledger.clear()


run_logger = RunLogger()
