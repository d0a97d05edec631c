"""Embedding extraction into the awt task-manifest format."""

from .encoders import DualEncoder, HfClipEncoder, ProjectionEncoder, get_encoder
from .errors import DecodeError, ExtractorError, ModelLoadError
from .extract import (
    ExtractionConfig,
    build_manifest,
    extract_class_texts,
    extract_image_views,
)

__all__ = [
    "DecodeError",
    "DualEncoder",
    "ExtractionConfig",
    "ExtractorError",
    "HfClipEncoder",
    "ModelLoadError",
    "ProjectionEncoder",
    "build_manifest",
    "extract_class_texts",
    "extract_image_views",
    "get_encoder",
]
