"""Task manifest: the JSON index tying classes, descriptions and array files.

Schema (relative paths resolve against the manifest's directory):

    {
      "dataset": {"name": str, "description": str},
      "dim": int,
      "classes": [{"name": str, "descriptions": [str, ...],
                   "embeddings_path": str}, ...],
      "images": [{"id": str, "label_index": int, "views_path": str}, ...]
    }

Unknown fields are ignored for forward compatibility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError
from .npyio import read_header


@dataclass(frozen=True)
class ManifestClass:
    name: str
    descriptions: tuple[str, ...]
    embeddings_path: Path


@dataclass(frozen=True)
class ManifestImage:
    id: str
    label_index: int
    views_path: Path


@dataclass(frozen=True)
class TaskManifest:
    dataset_name: str
    dataset_description: str
    dim: int
    classes: tuple[ManifestClass, ...]
    images: tuple[ManifestImage, ...]
    root: Path

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)

    def class_index(self, name: str) -> int:
        for i, c in enumerate(self.classes):
            if c.name == name:
                return i
        raise KeyError(name)

    def image_index(self, image_id: str) -> int:
        for i, e in enumerate(self.images):
            if e.id == image_id:
                return i
        raise KeyError(image_id)


def _expect(obj: dict, key: str, kind, path: str, where: str):
    if key not in obj:
        raise SchemaError(path, f"{where}.{key}", "missing")
    value = obj[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(path, f"{where}.{key}", f"expected number, got {type(value).__name__}")
        return value
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise SchemaError(path, f"{where}.{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_manifest(path: str | Path) -> TaskManifest:
    """Parse and structurally validate a manifest file.

    Raises SchemaError naming the offending field; file-level checks
    (existence, shapes, dims) belong to validate_manifest.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(str(path), "<root>", str(exc)) from exc
    if not isinstance(payload, dict):
        raise SchemaError(str(path), "<root>", "manifest must be a JSON object")
    spath = str(path)
    root = path.resolve().parent

    dataset = _expect(payload, "dataset", dict, spath, "<root>")
    name = _expect(dataset, "name", str, spath, "dataset")
    if not name:
        raise SchemaError(spath, "dataset.name", "must be nonempty")
    description = dataset.get("description", "")
    if not isinstance(description, str):
        raise SchemaError(spath, "dataset.description", "expected string")

    dim = _expect(payload, "dim", int, spath, "<root>")
    if dim < 1:
        raise SchemaError(spath, "dim", "must be >= 1")

    raw_classes = _expect(payload, "classes", list, spath, "<root>")
    if not raw_classes:
        raise SchemaError(spath, "classes", "must be nonempty")
    classes = []
    for i, entry in enumerate(raw_classes):
        if not isinstance(entry, dict):
            raise SchemaError(spath, f"classes[{i}]", "expected object")
        cname = _expect(entry, "name", str, spath, f"classes[{i}]")
        descs = _expect(entry, "descriptions", list, spath, f"classes[{i}]")
        if not all(isinstance(d, str) for d in descs):
            raise SchemaError(spath, f"classes[{i}].descriptions", "expected strings")
        rel = _expect(entry, "embeddings_path", str, spath, f"classes[{i}]")
        classes.append(ManifestClass(cname, tuple(descs), (root / rel).resolve()))

    raw_images = _expect(payload, "images", list, spath, "<root>")
    if not raw_images:
        raise SchemaError(spath, "images", "must be nonempty")
    images = []
    for i, entry in enumerate(raw_images):
        if not isinstance(entry, dict):
            raise SchemaError(spath, f"images[{i}]", "expected object")
        iid = _expect(entry, "id", str, spath, f"images[{i}]")
        label = _expect(entry, "label_index", int, spath, f"images[{i}]")
        rel = _expect(entry, "views_path", str, spath, f"images[{i}]")
        images.append(ManifestImage(iid, label, (root / rel).resolve()))

    return TaskManifest(
        dataset_name=name,
        dataset_description=description,
        dim=dim,
        classes=tuple(classes),
        images=tuple(images),
        root=root,
    )


def validate_manifest(m: TaskManifest) -> list[str]:
    """Cross-check entries against their array files; returns diagnostics.

    Side-effect free: only file headers are read.  An empty list means the
    manifest is ready for evaluation.
    """
    diagnostics: list[str] = []
    for i, entry in enumerate(m.classes):
        where = f"classes[{i}] ({entry.name})"
        if not entry.embeddings_path.is_file():
            diagnostics.append(f"{where}: embeddings file missing: {entry.embeddings_path}")
            continue
        try:
            rows, dim = read_header(entry.embeddings_path)
        except Exception as exc:
            diagnostics.append(f"{where}: unreadable embeddings file: {exc}")
            continue
        expected = len(entry.descriptions) + 1
        if rows != expected:
            diagnostics.append(
                f"{where}: {entry.embeddings_path.name} has {rows} rows, "
                f"expected {expected} (1 raw name + {len(entry.descriptions)} descriptions)"
            )
        if dim != m.dim:
            diagnostics.append(
                f"{where}: {entry.embeddings_path.name} has dim {dim}, manifest declares {m.dim}"
            )

    seen_ids: set[str] = set()
    for i, entry in enumerate(m.images):
        where = f"images[{i}] ({entry.id})"
        if entry.id in seen_ids:
            diagnostics.append(f"{where}: duplicate image id")
        seen_ids.add(entry.id)
        if not (0 <= entry.label_index < len(m.classes)):
            diagnostics.append(
                f"{where}: label out of range ({entry.label_index} with {len(m.classes)} classes)"
            )
        if not entry.views_path.is_file():
            diagnostics.append(f"{where}: views file missing: {entry.views_path}")
            continue
        try:
            rows, dim = read_header(entry.views_path)
        except Exception as exc:
            diagnostics.append(f"{where}: unreadable views file: {exc}")
            continue
        if rows < 1:
            diagnostics.append(f"{where}: views file has no rows")
        if dim != m.dim:
            diagnostics.append(
                f"{where}: {entry.views_path.name} has dim {dim}, manifest declares {m.dim}"
            )
    return diagnostics
