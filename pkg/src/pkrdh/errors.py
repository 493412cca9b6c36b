class PkrdhError(Exception):
    """Base class for all library errors."""


class ParameterError(PkrdhError, ValueError):
    pass


class DimensionMismatch(PkrdhError, ValueError):
    pass


class PreconditionError(PkrdhError, ValueError):
    """An operation was called outside its contract (unavailable pair, payload too long...)."""


class RetryLimitExceeded(PkrdhError, RuntimeError):
    """Bounded encryption failed to find a low-noise mask; alpha is too large for the bound."""


class ExtractionError(PkrdhError, ValueError):
    """Extracted data is out of range, usually a wrong N or a corrupted ciphertext."""


class IntegrityError(PkrdhError):
    """Payload checksum mismatch, typically decoding with the wrong secret key."""


class FormatError(PkrdhError, ValueError):
    pass


class SecurityWarning(UserWarning):
    pass
