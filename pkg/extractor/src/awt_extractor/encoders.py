"""Dual encoders mapping images and texts into one embedding space.

Two families are supported through the model-identifier string:

  proj:<dim>   deterministic random-projection encoder; needs no weights,
               works fully offline, and is seeded from the identifier, so
               the same id always produces the same embedding function.
  hf:<name>    CLIP-style dual encoder loaded through transformers; used
               when the named checkpoint is available locally.

Embeddings are float32 unit vectors.
"""

from __future__ import annotations

import hashlib
import zlib
from typing import Protocol

import numpy as np
from PIL import Image

from .errors import ModelLoadError

_IMAGE_SIDE = 16
_TEXT_BUCKETS = 4096


class DualEncoder(Protocol):
    model_id: str
    dim: int

    def embed_image(self, image: Image.Image) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        v = np.ones_like(v)
        norm = float(np.linalg.norm(v))
    return (v / norm).astype(np.float32)


class ProjectionEncoder:
    """Fixed random projections of raw pixels and character trigrams.

    Not semantically meaningful, but a structurally faithful dual encoder:
    deterministic, modality-agnostic output space, unit-norm rows.  Ideal
    for pipeline tests and offline integration work.
    """

    def __init__(self, model_id: str, dim: int):
        if dim < 1:
            raise ModelLoadError(f"embedding dim must be >= 1, got {dim}")
        self.model_id = model_id
        self.dim = dim
        seed = int.from_bytes(hashlib.sha256(model_id.encode("utf-8")).digest()[:8], "little")
        rng = np.random.Generator(np.random.PCG64(seed))
        pixels = _IMAGE_SIDE * _IMAGE_SIDE * 3
        self._w_image = rng.standard_normal((pixels, dim)) / np.sqrt(pixels)
        self._w_text = rng.standard_normal((_TEXT_BUCKETS, dim)) / np.sqrt(_TEXT_BUCKETS)

    def embed_image(self, image: Image.Image) -> np.ndarray:
        small = image.convert("RGB").resize((_IMAGE_SIDE, _IMAGE_SIDE), Image.BILINEAR)
        flat = np.asarray(small, dtype=np.float64).reshape(-1) / 255.0 - 0.5
        return _unit(flat @ self._w_image)

    def embed_text(self, text: str) -> np.ndarray:
        data = b" " + text.lower().encode("utf-8") + b" "
        counts = np.zeros(_TEXT_BUCKETS)
        for i in range(len(data) - 2):
            counts[zlib.crc32(data[i : i + 3]) % _TEXT_BUCKETS] += 1.0
        return _unit(np.log1p(counts) @ self._w_text)


class HfClipEncoder:
    """CLIP dual encoder via transformers; requires a local checkpoint."""

    def __init__(self, model_id: str, name: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadError(f"transformers/torch not installed: {exc}") from exc
        try:
            self._model = CLIPModel.from_pretrained(name)
            self._processor = CLIPProcessor.from_pretrained(name)
        except Exception as exc:
            raise ModelLoadError(f"cannot load checkpoint {name!r}: {exc}") from exc
        self._torch = torch
        self._model.eval()
        self.model_id = model_id
        self.dim = int(self._model.config.projection_dim)

    def embed_image(self, image: Image.Image) -> np.ndarray:
        inputs = self._processor(images=image.convert("RGB"), return_tensors="pt")
        with self._torch.no_grad():
            features = self._model.get_image_features(**inputs)
        return _unit(features[0].numpy().astype(np.float64))

    def embed_text(self, text: str) -> np.ndarray:
        inputs = self._processor(text=[text], return_tensors="pt", padding=True, truncation=True)
        with self._torch.no_grad():
            features = self._model.get_text_features(**inputs)
        return _unit(features[0].numpy().astype(np.float64))


def get_encoder(model_id: str) -> DualEncoder:
    if model_id.startswith("proj:"):
        try:
            dim = int(model_id.split(":", 1)[1])
        except ValueError as exc:
            raise ModelLoadError(f"bad projection dim in {model_id!r}") from exc
        return ProjectionEncoder(model_id, dim)
    if model_id.startswith("hf:"):
        return HfClipEncoder(model_id, model_id.split(":", 1)[1])
    raise ModelLoadError(f"unknown model identifier {model_id!r} (use proj:<dim> or hf:<name>)")
