"""Seeded image augmentation: random resized crops and horizontal flips."""

from __future__ import annotations

import math

import numpy as np
from PIL import Image

_RATIO_RANGE = (3.0 / 4.0, 4.0 / 3.0)
_ATTEMPTS = 10


def center_crop_square(image: Image.Image) -> Image.Image:
    """Largest centered square; the preprocessing for the original view."""
    w, h = image.size
    side = min(w, h)
    left = (w - side) // 2
    top = (h - side) // 2
    return image.crop((left, top, left + side, top + side))


def sample_crop_box(
    rng: np.random.Generator, width: int, height: int, scale: tuple[float, float]
) -> tuple[int, int, int, int]:
    """Crop box with area in `scale` (fraction) and aspect in [3/4, 4/3].

    Falls back to the centered square when no sampled box fits, mirroring
    common resized-crop implementations.
    """
    area = width * height
    log_lo, log_hi = math.log(_RATIO_RANGE[0]), math.log(_RATIO_RANGE[1])
    for _ in range(_ATTEMPTS):
        target = area * rng.uniform(scale[0], scale[1])
        ratio = math.exp(rng.uniform(log_lo, log_hi))
        w = int(round(math.sqrt(target * ratio)))
        h = int(round(math.sqrt(target / ratio)))
        if 0 < w <= width and 0 < h <= height:
            left = int(rng.integers(0, width - w + 1))
            top = int(rng.integers(0, height - h + 1))
            return (left, top, left + w, top + h)
    side = min(width, height)
    left = (width - side) // 2
    top = (height - side) // 2
    return (left, top, left + side, top + side)


def random_view(
    image: Image.Image,
    rng: np.random.Generator,
    scale: tuple[float, float],
    flip_probability: float,
) -> Image.Image:
    box = sample_crop_box(rng, image.size[0], image.size[1], scale)
    view = image.crop(box)
    if rng.random() < flip_probability:
        view = view.transpose(Image.FLIP_LEFT_RIGHT)
    return view
