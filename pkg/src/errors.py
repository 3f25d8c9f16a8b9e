# -*- coding: utf-8 -*-

from typing import Optional

# Process exit codes used by main.py
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class SdattError(Exception):
    """Base class for every error raised by the toolkit."""
    exit_code = EXIT_USAGE


class UsageError(SdattError):
    exit_code = EXIT_USAGE


class ConfigurationError(SdattError):
    """Inconsistent settings, e.g. a syntax attention kind without a tree file."""
    exit_code = EXIT_USAGE


class DataError(SdattError):
    exit_code = EXIT_DATA


class ParseError(DataError):
    """Malformed input row. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class StructureError(DataError):
    """Dependency heads that do not form a single rooted tree."""


class FormatError(DataError):
    """Malformed mask TSV or other declared file format."""


class CheckpointError(DataError):
    """Corrupt, truncated or incompatible checkpoint file."""


class NumericError(SdattError, FloatingPointError):
    exit_code = EXIT_NUMERIC


class DimensionError(SdattError, ValueError):
    exit_code = EXIT_NUMERIC


class ContractError(SdattError, ValueError):
    exit_code = EXIT_NUMERIC


class MaskIndexError(SdattError, IndexError):
    exit_code = EXIT_USAGE
