class ExtractorError(Exception):
    """Base class for extraction failures."""


class DecodeError(ExtractorError):
    """An input image could not be decoded."""


class ModelLoadError(ExtractorError):
    """The requested encoder could not be constructed."""
