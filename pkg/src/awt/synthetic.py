"""Synthetic Gaussian-cluster tasks for demos and end-to-end tests.

Every class gets a random unit direction; class descriptions and image
views are normalized samples of `separation * direction + noise` with unit
per-coordinate noise.  At separation 10 the clusters are far apart and the
nearest-centroid label is unambiguous; at separation 0 there is no class
signal at all (the accuracy noise floor).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import EmbeddingMatrix
from .npyio import write_array


def _sample(rng: np.random.Generator, direction: np.ndarray, separation: float) -> np.ndarray:
    point = separation * direction + rng.standard_normal(direction.size)
    return point / np.linalg.norm(point)


def make_gaussian_task(
    root: str | Path,
    n_classes: int = 3,
    n_images: int = 30,
    n_views: int = 5,
    m_descriptions: int = 5,
    dim: int = 64,
    separation: float = 10.0,
    seed: int = 42,
) -> Path:
    """Write class/image arrays plus a manifest under `root`.

    Labels cycle through the classes, so they are balanced.  For positive
    separation the generator verifies that every image's nearest class
    direction is its label (the brute-force oracle for the expected
    accuracy of 1.0).  Returns the manifest path.
    """
    root = Path(root)
    (root / "classes").mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    directions = rng.standard_normal((n_classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    classes = []
    for ci in range(n_classes):
        rows = np.stack(
            [_sample(rng, directions[ci], separation) for _ in range(m_descriptions + 1)]
        )
        rel = f"classes/class_{ci}.npy"
        write_array(EmbeddingMatrix(rows.astype(np.float32)), root / rel)
        classes.append(
            {
                "name": f"class_{ci}",
                "descriptions": [
                    f"synthetic description {j} of class_{ci}" for j in range(m_descriptions)
                ],
                "embeddings_path": rel,
            }
        )

    images = []
    for k in range(n_images):
        label = k % n_classes
        anchor = separation * directions[label] + rng.standard_normal(dim)
        views = [anchor / np.linalg.norm(anchor)]
        for _ in range(n_views):
            jittered = anchor + rng.standard_normal(dim)
            views.append(jittered / np.linalg.norm(jittered))
        rows = np.stack(views).astype(np.float32)
        if separation > 0:
            nearest = int(np.argmax(directions @ rows[0].astype(np.float64)))
            if nearest != label:
                raise RuntimeError(
                    f"separation {separation} too small: image {k} lands nearest class {nearest}"
                )
        rel = f"images/img_{k:03d}.npy"
        write_array(EmbeddingMatrix(rows), root / rel)
        images.append({"id": f"img_{k:03d}", "label_index": label, "views_path": rel})

    manifest = {
        "dataset": {
            "name": "synthetic-gaussian",
            "description": f"synthetic gaussian clusters (separation {separation}, seed {seed})",
        },
        "dim": dim,
        "classes": classes,
        "images": images,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path
