"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: validation problems exit 2, file
format / I/O problems exit 3, model transport problems exit 4.
"""


class MorphcfError(Exception):
    """Base class for all package errors."""


class ValidationError(MorphcfError):
    """Input violates a documented precondition or invariant."""


class PairingError(ValidationError):
    """Volume and segment map dimensions disagree."""


class FileFormatError(MorphcfError):
    """A data file could not be parsed."""


class BadMagicError(FileFormatError):
    """File does not start with the expected magic bytes."""


class TruncatedFileError(FileFormatError):
    """File is shorter than its header implies."""


class TrailingDataError(FileFormatError):
    """File is longer than its header implies."""


class BadDimensionsError(FileFormatError):
    """Header declares a zero or otherwise unusable dimension."""


class ManifestError(MorphcfError):
    """Dataset failed to load. Collects every failure, not just the first."""

    def __init__(self, failures):
        self.failures = list(failures)
        lines = "; ".join(self.failures)
        super().__init__(f"{len(self.failures)} dataset failure(s): {lines}")


class TransportError(MorphcfError):
    """A request to an external model failed. Carries the offending id."""

    def __init__(self, message, volume_id=None):
        self.volume_id = volume_id
        super().__init__(message)


class TransportTimeoutError(TransportError):
    """External model did not answer within the configured timeout."""


class MalformedResponseError(TransportError):
    """External model response could not be parsed or lacked fields."""


class ProbabilityRangeError(TransportError):
    """External model returned a probability outside [0, 1]."""
