"""Exception hierarchy with stable machine-readable error codes.

Every error carries a ``code`` string that the CLI emits in its JSON error
output, so scripts can dispatch on failures without parsing messages.
"""

from __future__ import annotations


class SsrbError(Exception):
    """Base class for all package errors."""

    code = "ERROR"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    def to_json_dict(self) -> dict:
        d = {"error": self.code, "message": str(self)}
        if self.context:
            d["context"] = {k: v for k, v in self.context.items()}
        return d


class GridMismatchError(SsrbError):
    code = "GRID_MISMATCH"


class WindowTooShortError(SsrbError):
    code = "WINDOW_TOO_SHORT"


class PsdRangeError(SsrbError):
    code = "PSD_RANGE"


class ParseError(SsrbError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None, **context):
        if line is not None:
            context["line"] = line
        super().__init__(message, **context)
        self.line = line


class NonMonotoneFrequencyError(SsrbError):
    code = "NON_MONOTONE_FREQ"


class TraceTooLongError(SsrbError):
    code = "TRACE_TOO_LONG"


class LengthMismatchError(SsrbError):
    code = "LENGTH_MISMATCH"


class ShapeMismatchError(SsrbError):
    code = "SHAPE_MISMATCH"


class ProvenanceMismatchError(SsrbError):
    code = "PROVENANCE_MISMATCH"


class NonFiniteLossError(SsrbError):
    code = "NON_FINITE_LOSS"


class FitDivergedError(SsrbError):
    code = "FIT_DIVERGED"


class AmbiguousFrequencyError(SsrbError):
    code = "AMBIGUOUS_FREQUENCY"


class ProbabilityRangeError(SsrbError):
    code = "PROBABILITY_RANGE"


class FileFormatError(SsrbError):
    code = "BAD_MAGIC"


class VersionMismatchError(FileFormatError):
    code = "VERSION_MISMATCH"


class ChecksumError(FileFormatError):
    code = "CHECKSUM_FAIL"


class ConfigError(SsrbError):
    code = "CONFIG"

    def __init__(self, message: str, key: str | None = None, **context):
        if key is not None:
            context["key"] = key
        super().__init__(message, **context)
        self.key = key
