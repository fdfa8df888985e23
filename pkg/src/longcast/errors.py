"""Exception hierarchy shared across the pipeline.

Each class maps to one CLI exit code (see cli.EXIT_CODES) and one
service error_class string so failures stay distinguishable across the
process boundary.
"""

from __future__ import annotations


class LongcastError(Exception):
    """Base class for all pipeline errors."""

    error_class = "internal"


class ParseError(LongcastError):
    """Malformed input row or cell (wrong column count, bad number)."""

    error_class = "parse"


class EncodingError(ParseError):
    """A categorical label outside the declared vocabulary."""

    error_class = "parse"


class SchemaError(LongcastError):
    """Structural violation: duplicate keys, unknown columns, table mismatch."""

    error_class = "schema"


class ConfigError(LongcastError):
    """Invalid configuration value (bad k, unknown task, missing key)."""

    error_class = "config"


class BridgeError(LongcastError):
    """External model host failed (nonzero exit, handshake refused)."""

    error_class = "bridge"


class ProtocolError(BridgeError):
    """Host reply violated the wire protocol (bad line, count mismatch)."""

    error_class = "bridge"


class BridgeTimeout(BridgeError):
    """Host exceeded the session deadline."""

    error_class = "bridge"


class MetricUndefinedError(LongcastError):
    """Metric has no value on this input (absent class, empty input)."""

    error_class = "metric"


class ContractViolation(LongcastError, ValueError):
    """Caller broke a documented precondition; indicates a programming bug."""

    error_class = "internal"
