"""Exception types shared across the package."""


class LipdiscError(Exception):
    """Base class for all package errors."""


class IndexOutOfRangeError(LipdiscError):
    """A subset references elements outside the ground set."""


class SupportTooLargeError(LipdiscError):
    """Exact multilinear evaluation was asked for too many fractional coordinates."""


class NotAdditiveError(LipdiscError):
    """The LP route only accepts families in which every function is additive."""


class TooLargeError(LipdiscError):
    """An exhaustive enumeration would exceed its size cap."""


class VerificationFailedError(LipdiscError):
    """Certificate extraction failed although the discrepancy bound held.

    This signals a pipeline bug, not an expected outcome.
    """


class UnknownKindError(LipdiscError):
    """An unrecognized set-function kind name."""


class UnstructuredError(LipdiscError):
    """Structural relevant-element computation was requested for a kind without structure."""
