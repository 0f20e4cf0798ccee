"""
Exceptions raised by the numerical core, the data layer and the CLI.

Every error carries a stable code so the CLI can print a single
machine-parsable line and exit with a non-zero status.
"""
from enum import Enum
from typing import Optional


class LenaErrorCode(str, Enum):
    """Stable error codes."""
    SHAPE_MISMATCH = "SHAPE_MISMATCH"
    NON_FINITE = "NON_FINITE"
    ETA_OUT_OF_RANGE = "ETA_OUT_OF_RANGE"
    STALE_CACHE = "STALE_CACHE"
    INVALID_RECORD = "INVALID_RECORD"
    INSUFFICIENT_DATA = "INSUFFICIENT_DATA"
    PARSE_ERROR = "PARSE_ERROR"
    DIVERGENCE = "DIVERGENCE"
    CONFIG_ERROR = "CONFIG_ERROR"
    GRADCHECK_FAILED = "GRADCHECK_FAILED"


class LenaError(Exception):
    """
    Base exception.

    Attributes:
        error_code: stable code for logs and CLI output
        message: human-readable diagnostic
        exit_code: process exit status used by the CLI
    """

    def __init__(
        self,
        error_code: LenaErrorCode,
        message: str,
        exit_code: int = 1
    ):
        self.error_code = error_code
        self.message = message
        self.exit_code = exit_code
        super().__init__(message)

    def one_line(self) -> str:
        """Render as `error code=... message="..."` on a single line."""
        text = " ".join(self.message.split()).replace('"', "'")
        return f'error code={self.error_code.value} message="{text}"'


class ShapeMismatchError(LenaError):
    """Raised when tensor shapes are inconsistent."""

    def __init__(self, what: str, expected: object, got: object):
        super().__init__(
            error_code=LenaErrorCode.SHAPE_MISMATCH,
            message=f"{what}: expected {expected}, got {got}",
        )


class NonFiniteError(LenaError):
    """Raised when NaN or Inf shows up in an activation or gradient."""

    def __init__(self, name: str, stage: str = "forward"):
        self.name = name
        super().__init__(
            error_code=LenaErrorCode.NON_FINITE,
            message=f"non-finite values in {name} during {stage}",
        )


class EtaRangeError(LenaError):
    """Raised when a pooling fraction falls outside [0, 1]."""

    def __init__(self, eta: float):
        super().__init__(
            error_code=LenaErrorCode.ETA_OUT_OF_RANGE,
            message=f"eta must lie in [0, 1], got {eta!r}",
        )


class StaleCacheError(LenaError):
    """Raised when backward receives state from a different forward pass."""

    def __init__(self, reason: str):
        super().__init__(
            error_code=LenaErrorCode.STALE_CACHE,
            message=f"stale forward cache: {reason}",
        )


class InvalidRecordError(LenaError):
    """Raised when an engagement record cannot produce a finite virality score."""

    def __init__(self, record_id: str, reason: str):
        super().__init__(
            error_code=LenaErrorCode.INVALID_RECORD,
            message=f"record {record_id!r}: {reason}",
        )


class InsufficientDataError(LenaError):
    """Raised when a dataset is too small for the requested operation."""

    def __init__(self, reason: str):
        super().__init__(
            error_code=LenaErrorCode.INSUFFICIENT_DATA,
            message=reason,
        )


class ParseError(LenaError):
    """Raised for malformed input files; carries the offending position."""

    def __init__(self, path: str, reason: str, position: Optional[str] = None):
        where = f"{path}:{position}" if position else path
        super().__init__(
            error_code=LenaErrorCode.PARSE_ERROR,
            message=f"{where}: {reason}",
            exit_code=2,
        )


class DivergenceError(LenaError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        super().__init__(
            error_code=LenaErrorCode.DIVERGENCE,
            message=f"loss diverged at iteration {iteration} (loss={loss})",
            exit_code=3,
        )


class ConfigError(LenaError):
    """Raised for invalid run configurations or flags."""

    def __init__(self, reason: str):
        super().__init__(
            error_code=LenaErrorCode.CONFIG_ERROR,
            message=reason,
            exit_code=2,
        )


class GradCheckFailedError(LenaError):
    """Raised by the CLI when a gradient group exceeds its tolerance."""

    def __init__(self, group: str, max_rel_error: float, tolerance: float):
        super().__init__(
            error_code=LenaErrorCode.GRADCHECK_FAILED,
            message=f"group {group}: max relative error {max_rel_error:.3e} exceeds {tolerance:.1e}",
            exit_code=4,
        )
