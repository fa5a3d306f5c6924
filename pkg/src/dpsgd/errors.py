"""Exception types shared across the engine.

ConfigurationError maps to CLI exit code 2; everything else that escapes a
run maps to exit code 3.
"""


class DpsgdError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(DpsgdError, ValueError):
    """Invalid configuration, dimension mismatch, or bad argument."""


class NumericFaultError(DpsgdError, ArithmeticError):
    """A non-finite value appeared where finite numbers are required.

    The message names the first offending dimension.
    """


class WireProtocolError(DpsgdError):
    """Malformed or truncated frame on the TCP transport."""


class CorpusFormatError(DpsgdError):
    """Malformed bag-of-words corpus file; message carries the line number."""


class TransportError(DpsgdError):
    """Transport failure (peer vanished, retries exhausted, timeout)."""
