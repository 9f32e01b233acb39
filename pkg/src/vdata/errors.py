"""Error taxonomy shared by every layer.

Each exception carries a stable machine code (UPPER_SNAKE) so the HTTP layer
and the CLI can map failures without string matching.
"""

from __future__ import annotations

from typing import Any


class VdataError(Exception):
    """Base class for all service errors."""

    code = "INTERNAL"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = {k: v for k, v in details.items() if v is not None}

    def __str__(self) -> str:
        if self.details:
            extras = ", ".join(f"{k}={v!r}" for k, v in self.details.items())
            return f"{self.message} ({extras})"
        return self.message


# ---------------------------------------------------------------------------
# core model / CSV


class DuplicateColumn(VdataError):
    code = "DUPLICATE_COLUMN"


class RaggedRow(VdataError):
    code = "RAGGED_ROW"


class ParseError(VdataError):
    code = "PARSE_ERROR"


# ---------------------------------------------------------------------------
# spec parsing / validation


class SpecSyntaxError(VdataError):
    code = "SYNTAX_ERROR"


class MissingField(VdataError):
    code = "MISSING_FIELD"


class UnknownField(VdataError):
    code = "UNKNOWN_FIELD"


class BadVersion(VdataError):
    code = "BAD_VERSION"


class UnknownDataset(VdataError):
    code = "UNKNOWN_DATASET"


class UnknownTransform(VdataError):
    code = "UNKNOWN_TRANSFORM"


class ParamError(VdataError):
    code = "PARAM_ERROR"

    def __init__(self, key: str, reason: str, **details: Any) -> None:
        super().__init__(f"parameter {key!r}: {reason}", key=key, reason=reason, **details)
        self.key = key
        self.reason = reason


class ArityMismatch(VdataError):
    code = "ARITY_MISMATCH"

    def __init__(self, expected: Any, got: Any, what: str = "inputs") -> None:
        super().__init__(f"{what}: expected {expected}, got {got}", expected=expected, got=got)


# ---------------------------------------------------------------------------
# catalog


class NotFound(VdataError):
    code = "NOT_FOUND"


class ValidationStale(VdataError):
    code = "VALIDATION_STALE"


class CycleDetected(VdataError):
    code = "CYCLE_DETECTED"


class HasDependents(VdataError):
    code = "HAS_DEPENDENTS"

    def __init__(self, ids: list[str]) -> None:
        super().__init__(f"{len(ids)} active dependent dataset(s)", ids=ids)
        self.ids = ids


# ---------------------------------------------------------------------------
# storage


class UnreadableSource(VdataError):
    code = "UNREADABLE_SOURCE"


class EmptyDataset(VdataError):
    code = "EMPTY_DATASET"


class SourceChanged(VdataError):
    code = "SOURCE_CHANGED"


# ---------------------------------------------------------------------------
# transforms


class NoCommonColumns(VdataError):
    code = "NO_COMMON_COLUMNS"


class UnknownColumn(VdataError):
    code = "UNKNOWN_COLUMN"


class UnknownLabelKey(VdataError):
    code = "UNKNOWN_LABEL_KEY"


class MissingKey(VdataError):
    code = "MISSING_KEY"


class UnpairedObject(VdataError):
    code = "UNPAIRED_OBJECT"


class NonNumericColumn(VdataError):
    code = "NON_NUMERIC_COLUMN"


class DuplicateTransform(VdataError):
    code = "DUPLICATE_TRANSFORM"


class PluginCrashed(VdataError):
    code = "PLUGIN_CRASHED"

    def __init__(self, status: int, stderr_excerpt: str) -> None:
        super().__init__(f"plugin exited with status {status}", status=status, stderr=stderr_excerpt)
        self.status = status


class ProtocolViolation(VdataError):
    code = "PROTOCOL_VIOLATION"


class PluginTimeout(VdataError):
    code = "TIMEOUT"


# ---------------------------------------------------------------------------
# engine


class BrokenLineage(VdataError):
    code = "BROKEN_LINEAGE"


class TransformFailed(VdataError):
    code = "TRANSFORM_FAILED"

    def __init__(self, node: str, cause: Exception) -> None:
        super().__init__(f"transform node {node} failed: {cause}", node=node, cause=str(cause))
        self.node = node
        self.cause = cause


class CacheCorrupt(VdataError):
    code = "CACHE_CORRUPT"


# ---------------------------------------------------------------------------
# service


class Unauthorized(VdataError):
    code = "UNAUTHORIZED"
