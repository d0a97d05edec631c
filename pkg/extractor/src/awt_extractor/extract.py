"""Render a folder-per-class image dataset into the task-manifest format.

Outputs are the consuming pipeline's external interfaces and nothing else:
float32 C-order v1.0 .npy arrays (one per class and per image) plus the
manifest JSON.  Every image-view file holds the original view first, then
the augmented views; every class file holds the raw-name embedding first,
then the description embeddings.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import center_crop_square, random_view
from .encoders import DualEncoder, get_encoder
from .errors import DecodeError, ExtractorError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")
RAW_NAME_TEMPLATE = "a photo of a {}."


@dataclass(frozen=True)
class ExtractionConfig:
    model: str = "proj:64"
    n_views: int = 50
    scale: tuple[float, float] = (0.5, 1.0)
    flip_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_views < 0:
            raise ExtractorError(f"n_views must be >= 0, got {self.n_views}")
        lo, hi = self.scale
        if not (0.0 < lo <= hi <= 1.0):
            raise ExtractorError(f"crop scale range must satisfy 0 < lo <= hi <= 1, got {self.scale}")
        if not (0.0 <= self.flip_probability <= 1.0):
            raise ExtractorError(f"flip probability must be in [0, 1], got {self.flip_probability}")


def _write_f4(path: Path, rows: np.ndarray) -> None:
    arr = np.ascontiguousarray(rows, dtype=np.float32)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.save(fh, arr)


def _open_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc


def _image_rng(cfg: ExtractionConfig, key: str) -> np.random.Generator:
    # seeded per image from (seed, path hash): stable under reordering
    return np.random.default_rng([cfg.seed, zlib.crc32(key.encode("utf-8"))])


def extract_image_views(
    image_path: str | Path,
    cfg: ExtractionConfig,
    out_path: str | Path,
    encoder: DualEncoder | None = None,
    rng_key: str | None = None,
) -> Path:
    """Embed the original view plus cfg.n_views augmented crops; write .npy."""
    encoder = encoder or get_encoder(cfg.model)
    image_path = Path(image_path)
    image = _open_image(image_path)
    rng = _image_rng(cfg, rng_key if rng_key is not None else image_path.name)
    rows = [encoder.embed_image(center_crop_square(image))]
    for _ in range(cfg.n_views):
        rows.append(encoder.embed_image(random_view(image, rng, cfg.scale, cfg.flip_probability)))
    out_path = Path(out_path)
    _write_f4(out_path, np.stack(rows))
    return out_path


def extract_class_texts(
    class_name: str,
    descriptions: list[str],
    cfg: ExtractionConfig,
    out_path: str | Path,
    encoder: DualEncoder | None = None,
) -> Path:
    """Embed the templated raw class name plus its descriptions; write .npy."""
    encoder = encoder or get_encoder(cfg.model)
    texts = [RAW_NAME_TEMPLATE.format(class_name)] + list(descriptions)
    rows = np.stack([encoder.embed_text(t) for t in texts])
    out_path = Path(out_path)
    _write_f4(out_path, rows)
    return out_path


def _load_descriptions(path: Path) -> dict[str, list[str]]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    classes = payload.get("classes")
    if not isinstance(classes, list):
        raise ExtractorError(f"{path}: expected a 'classes' list (gen-descriptions output)")
    table = {}
    for entry in classes:
        table[entry["name"]] = list(entry["descriptions"])
    return table


def _class_dirs(data_dir: Path) -> list[Path]:
    dirs = sorted(p for p in data_dir.iterdir() if p.is_dir())
    if not dirs:
        raise ExtractorError(f"{data_dir}: no class subdirectories found")
    return dirs


def _images_in(class_dir: Path) -> list[Path]:
    return sorted(p for p in class_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def build_manifest(
    data_dir: str | Path,
    descriptions_json: str | Path,
    cfg: ExtractionConfig,
    out_dir: str | Path,
) -> Path:
    """Extract a folder-per-class dataset into out_dir and write manifest.json.

    Every class directory must appear in the descriptions JSON; the error
    for a missing class names it.
    """
    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    encoder = get_encoder(cfg.model)
    descriptions = _load_descriptions(Path(descriptions_json))

    classes = []
    class_dirs = _class_dirs(data_dir)
    for class_dir in class_dirs:
        name = class_dir.name
        if name not in descriptions:
            raise ExtractorError(f"class {name!r} has no entry in {descriptions_json}")
        rel = f"classes/{name}.npy"
        extract_class_texts(name, descriptions[name], cfg, out_dir / rel, encoder)
        classes.append(
            {"name": name, "descriptions": descriptions[name], "embeddings_path": rel}
        )

    images = []
    for label, class_dir in enumerate(class_dirs):
        files = _images_in(class_dir)
        if not files:
            raise ExtractorError(f"class directory {class_dir} contains no images")
        for file in files:
            image_id = f"{class_dir.name}/{file.stem}"
            rel = f"images/{class_dir.name}__{file.stem}.npy"
            extract_image_views(file, cfg, out_dir / rel, encoder, rng_key=image_id)
            images.append({"id": image_id, "label_index": label, "views_path": rel})

    manifest = {
        "dataset": {
            "name": data_dir.name or "dataset",
            "description": f"extracted with {cfg.model} (seed {cfg.seed}, {cfg.n_views} views)",
        },
        "dim": encoder.dim,
        "classes": classes,
        "images": images,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path
