"""Exception hierarchy shared across the package.

Value-level problems (bad parameters, malformed containers, violated call
contracts) derive from ValueError so they also behave like ordinary Python
argument errors.  File-format and wire problems get their own tree so callers
can tell apart a truncated file from a bad magic number.
"""


class ParameterError(ValueError):
    """A caller-supplied parameter is out of its documented domain."""


class MalformedInputError(ValueError):
    """A container (edge list, index vector, ...) violates its invariants."""


class ContractViolationError(ValueError):
    """A documented precondition of an operation was not met."""


class FormatError(Exception):
    """Base class for on-disk / on-wire format problems."""


class BadMagicError(FormatError):
    """File or frame does not start with the expected magic bytes."""


class TruncatedError(FormatError):
    """Payload ended before the declared number of bytes."""


class UnsupportedVersionError(FormatError):
    """Recognized format but an unknown version or field code."""


class SizeMismatchError(FormatError):
    """Payload is self-consistent but disagrees with the companion object."""


class TransportError(RuntimeError):
    """A collective failed. ``rank`` is the offending peer, -1 if unknown."""

    def __init__(self, message, rank=-1):
        super().__init__(message)
        self.rank = rank


class ProtocolError(RuntimeError):
    """Peers violated the request/response protocol (not the byte framing)."""
