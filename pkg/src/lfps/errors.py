"""Exception types shared across the package."""


class LfpsError(Exception):
    """Base class for errors raised by this package."""


class TraceFormatError(LfpsError):
    """A trace byte stream violates the on-disk format contract."""


class BadMagicError(TraceFormatError):
    """Stream does not start with the expected magic bytes."""


class UnsupportedVersionError(TraceFormatError):
    """Magic matched but the format version is unknown."""


class TruncatedFileError(TraceFormatError):
    """Declared counts do not match the stream length."""


class ChecksumError(TraceFormatError):
    """Payload checksum mismatch (corrupt or tampered stream)."""


class LayoutError(TraceFormatError):
    """Header fields are internally inconsistent or out of range."""


class SessionRunError(LfpsError):
    """A decode stream failed mid-run.

    Carries the step index that failed and the results of the steps that
    completed before it.
    """

    def __init__(self, step: int, results: list, cause: BaseException):
        super().__init__(f"decode stream failed at step {step}: {cause}")
        self.step = step
        self.results = results
        self.cause = cause
