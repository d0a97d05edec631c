"""Exception hierarchy shared by every awt module."""


class AwtError(Exception):
    """Base class for all errors raised by this package."""


class ZeroNormRow(AwtError):
    """A row that must be normalized has (numerically) zero length."""

    def __init__(self, row_index: int):
        self.row_index = row_index
        super().__init__(f"row {row_index} has zero norm and cannot be normalized")


class DimensionMismatch(AwtError):
    """Feature dimensions of two operands disagree."""


class ShapeMismatch(AwtError):
    """Matrix/vector shapes are inconsistent for the requested operation."""


class InvalidTemperature(AwtError):
    """A softmax temperature is zero or negative."""


class TooFewClasses(AwtError):
    """Entropy-based weighting needs at least two candidate classes."""


class EmptyClassSet(AwtError):
    """Classification was requested against an empty class list."""


class NumericalOverflow(AwtError):
    """A scaling factor became non-finite (standard-domain solver only)."""


class SizeLimitExceeded(AwtError):
    """The exact solver is restricted to desk-scale instances."""


class InsufficientViews(AwtError):
    """A sweep requested more views than the manifest provides."""


class ManifestError(AwtError):
    """A task manifest entry is unusable; the message names the entry."""


class SchemaError(AwtError):
    """The manifest JSON does not match the expected schema."""

    def __init__(self, path: str, field: str, message: str = ""):
        self.path = path
        self.field = field
        detail = f": {message}" if message else ""
        super().__init__(f"{path}: invalid field '{field}'{detail}")


class BadMagic(AwtError):
    """File does not start with the expected array-file magic bytes."""


class UnsupportedDtype(AwtError):
    """Array file declares a dtype other than little-endian float32."""


class UnsupportedOrder(AwtError):
    """Array file declares Fortran (column-major) order."""


class TruncatedPayload(AwtError):
    """Array file payload is shorter than the header-declared shape."""


class UnparseableReply(AwtError):
    """A model reply contained no usable lines."""


class MissingPlaceholder(AwtError):
    """A generated question does not contain exactly one '{}' placeholder."""

    def __init__(self, line: str):
        self.line = line
        super().__init__(f"question lacks exactly one '{{}}' placeholder: {line!r}")


class ClientError(AwtError):
    """Transport or authentication failure talking to the chat endpoint."""


class QuotaExhausted(AwtError):
    """Bounded retries did not yield the requested number of replies."""


class UnknownId(AwtError):
    """An image id or class name does not exist in the manifest."""
