"""End-to-end classification: weight both modalities, transport, classify.

Four operating modes cover the ablation axes of the approach:
  raw         original view vs. raw class-name embeddings (cosine softmax)
  ensemble    mean image embedding vs. mean class embeddings
  ot_uniform  transport with uniform view/description weights
  awt         transport with entropy-based weights on both sides
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    DiscreteMeasure,
    EmbeddingMatrix,
    OtResult,
    TransportPlan,
    mean_embedding,
    mean_embedding_matrix,
)
from .errors import (
    DimensionMismatch,
    EmptyClassSet,
    InsufficientViews,
    InvalidTemperature,
    ManifestError,
    ShapeMismatch,
    TooFewClasses,
)
from .manifest import TaskManifest
from .npyio import read_array, read_header
from .transport import SinkhornConfig, awt_distance, classify_ot
from .weighting import (
    ClassProbabilities,
    classify_cosine,
    softmax,
    weight_class_descriptions,
    weight_image_views,
)

MODES = ("raw", "ensemble", "ot_uniform", "awt")
ENSEMBLE_SPACES = ("embedding", "probability")
SWEEP_AXES = ("N", "M", "gamma_v", "gamma_t", "epsilon")


@dataclass(frozen=True)
class AwtConfig:
    """Pipeline knobs; defaults follow the reference operating point."""

    n_image_views: int | None = 50
    m_descriptions: int | None = 50
    gamma_v: float = 0.5
    gamma_t: float = 0.5
    tau: float = 0.01
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    mode: str = "awt"
    ensemble_space: str = "embedding"
    renormalize_class_means: bool = True

    def __post_init__(self):
        if self.n_image_views is not None and self.n_image_views < 0:
            raise ShapeMismatch(f"n_image_views must be >= 0, got {self.n_image_views}")
        if self.m_descriptions is not None and self.m_descriptions < 0:
            raise ShapeMismatch(f"m_descriptions must be >= 0, got {self.m_descriptions}")
        for name in ("gamma_v", "gamma_t", "tau"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidTemperature(f"{name} must be positive, got {value}")
        if self.mode not in MODES:
            raise ShapeMismatch(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.ensemble_space not in ENSEMBLE_SPACES:
            raise ShapeMismatch(
                f"ensemble_space must be one of {ENSEMBLE_SPACES}, got {self.ensemble_space!r}"
            )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_image_views": self.n_image_views,
            "m_descriptions": self.m_descriptions,
            "gamma_v": self.gamma_v,
            "gamma_t": self.gamma_t,
            "tau": self.tau,
            "epsilon": self.sinkhorn.epsilon,
            "sinkhorn_max_iterations": self.sinkhorn.max_iterations,
            "sinkhorn_tolerance": self.sinkhorn.tolerance,
            "ensemble_space": self.ensemble_space,
            "renormalize_class_means": self.renormalize_class_means,
        }


@dataclass(frozen=True)
class ClassificationResult:
    image_id: str | None
    probs: ClassProbabilities
    predicted_index: int
    per_class_ot_cost: np.ndarray | None = None
    plans: tuple[TransportPlan, ...] | None = None
    converged: bool = True


@dataclass(frozen=True)
class EvaluationReport:
    top1_accuracy: float
    per_class_accuracy: dict[str, float | None]
    n_images: int
    config: dict
    results: tuple[ClassificationResult, ...] = field(repr=False, default=())
    labels: tuple[int, ...] = ()


def _subset(matrix: EmbeddingMatrix, extra_views: int | None) -> EmbeddingMatrix:
    """First 1 + extra_views rows (clamped to what the matrix holds)."""
    if extra_views is None:
        return matrix
    return matrix.take_rows(min(matrix.rows, extra_views + 1))


def transport_classify(
    img_views: EmbeddingMatrix,
    a: DiscreteMeasure,
    class_views: Sequence[EmbeddingMatrix],
    b_list: Sequence[DiscreteMeasure],
    sinkhorn_cfg: SinkhornConfig,
    tau: float,
    want_plans: bool = False,
) -> tuple[ClassProbabilities, np.ndarray, tuple[TransportPlan, ...] | None, bool]:
    """One transport solve per class, then a softmax over negative costs."""
    results: list[OtResult] = [
        awt_distance(img_views, a, views, b, sinkhorn_cfg)
        for views, b in zip(class_views, b_list)
    ]
    costs = np.array([r.cost for r in results], dtype=np.float64)
    probs = classify_ot(costs, tau)
    plans = tuple(r.plan for r in results) if want_plans else None
    converged = all(r.plan.converged for r in results)
    return probs, costs, plans, converged


def _ensemble_probs(
    views: EmbeddingMatrix, means: EmbeddingMatrix, cfg: AwtConfig
) -> ClassProbabilities:
    if cfg.ensemble_space == "embedding":
        img_mean = mean_embedding(views, cfg.renormalize_class_means)
        return classify_cosine(img_mean, means, cfg.tau)
    logits = (views.data.astype(np.float64) @ means.data.astype(np.float64).T) / cfg.tau
    per_view = np.stack([softmax(row) for row in logits])
    avg = per_view.mean(axis=0)
    avg = avg / avg.sum()
    with np.errstate(divide="ignore"):
        return ClassProbabilities(avg, np.log(avg))


def classify_image(
    image_views: EmbeddingMatrix,
    classes: Sequence[EmbeddingMatrix],
    cfg: AwtConfig = AwtConfig(),
    image_id: str | None = None,
    want_plans: bool = False,
) -> ClassificationResult:
    """Classify one image from its view set and the per-class description sets.

    Row 0 of image_views must be the original view; row 0 of every class
    matrix must be the raw class-name embedding.
    """
    if len(classes) == 0:
        raise EmptyClassSet("no classes supplied")
    dims = {m.dim for m in classes} | {image_views.dim}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent embedding dims: {sorted(dims)}")

    views = _subset(image_views, cfg.n_image_views)
    class_views = [_subset(c, cfg.m_descriptions) for c in classes]
    costs: np.ndarray | None = None
    plans: tuple[TransportPlan, ...] | None = None
    converged = True

    if cfg.mode == "raw":
        name_embs = EmbeddingMatrix(np.stack([c.row(0) for c in class_views]))
        probs = classify_cosine(views.row(0), name_embs, cfg.tau)
    elif cfg.mode == "ensemble":
        means = mean_embedding_matrix(class_views, cfg.renormalize_class_means)
        probs = _ensemble_probs(views, means, cfg)
    else:
        a, b_list = view_measures(views, class_views, cfg)
        probs, costs, plans, converged = transport_classify(
            views, a, class_views, b_list, cfg.sinkhorn, cfg.tau, want_plans
        )

    return ClassificationResult(
        image_id=image_id,
        probs=probs,
        predicted_index=probs.argmax,
        per_class_ot_cost=costs,
        plans=plans,
        converged=converged,
    )


def view_measures(
    views: EmbeddingMatrix,
    class_views: Sequence[EmbeddingMatrix],
    cfg: AwtConfig,
) -> tuple[DiscreteMeasure, list[DiscreteMeasure]]:
    """Image-side and per-class text-side measures for the transport modes."""
    n_classes = len(class_views)
    if cfg.mode == "ot_uniform":
        a = DiscreteMeasure.uniform(views.rows)
        b_list = [DiscreteMeasure.uniform(c.rows) for c in class_views]
        return a, b_list
    if n_classes < 2:
        raise TooFewClasses("entropy weighting needs at least 2 classes")
    means = mean_embedding_matrix(class_views, cfg.renormalize_class_means)
    a = weight_image_views(views, means, cfg.gamma_v, cfg.tau).weights
    x0 = views.row(0)
    b_list = []
    for i, c in enumerate(class_views):
        others = EmbeddingMatrix(np.delete(means.data, i, axis=0))
        b_list.append(weight_class_descriptions(x0, c, others, cfg.gamma_t, cfg.tau).weights)
    return a, b_list


class TaskData:
    """Loaded, normalized and subset task arrays shared across images."""

    def __init__(self, manifest: TaskManifest, cfg: AwtConfig):
        self.manifest = manifest
        self.cfg = cfg
        self.class_views: list[EmbeddingMatrix] = []
        for entry in manifest.classes:
            try:
                mat = read_array(entry.embeddings_path, normalize=True)
            except Exception as exc:
                raise ManifestError(f"class {entry.name!r}: {entry.embeddings_path}: {exc}") from exc
            if mat.dim != manifest.dim:
                raise ManifestError(
                    f"class {entry.name!r}: dim {mat.dim} != manifest dim {manifest.dim}"
                )
            self.class_views.append(_subset(mat, cfg.m_descriptions))

    def image_views(self, index: int) -> EmbeddingMatrix:
        entry = self.manifest.images[index]
        try:
            mat = read_array(entry.views_path, normalize=True)
        except Exception as exc:
            raise ManifestError(f"image {entry.id!r}: {entry.views_path}: {exc}") from exc
        if mat.dim != self.manifest.dim:
            raise ManifestError(
                f"image {entry.id!r}: dim {mat.dim} != manifest dim {self.manifest.dim}"
            )
        return mat

    def classify(self, index: int, want_plans: bool = False) -> ClassificationResult:
        return classify_image(
            self.image_views(index),
            self.class_views,
            self.cfg,
            image_id=self.manifest.images[index].id,
            want_plans=want_plans,
        )


def evaluate(manifest: TaskManifest, cfg: AwtConfig = AwtConfig(), jobs: int = 1) -> EvaluationReport:
    """Classify every manifest image and report top-1 accuracy.

    Work is distributed over a thread pool (jobs workers); results are
    aggregated in manifest order, so the report does not depend on jobs.
    """
    if not manifest.images:
        raise ManifestError("manifest lists no images")
    data = TaskData(manifest, cfg)
    indices = range(len(manifest.images))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(data.classify, indices))
    else:
        results = [data.classify(i) for i in indices]

    labels = [entry.label_index for entry in manifest.images]
    hits = [int(r.predicted_index == lab) for r, lab in zip(results, labels)]
    per_class: dict[str, float | None] = {}
    for ci, entry in enumerate(manifest.classes):
        idx = [k for k, lab in enumerate(labels) if lab == ci]
        per_class[entry.name] = (sum(hits[k] for k in idx) / len(idx)) if idx else None
    return EvaluationReport(
        top1_accuracy=sum(hits) / len(hits),
        per_class_accuracy=per_class,
        n_images=len(hits),
        config=cfg.to_dict(),
        results=tuple(results),
        labels=tuple(labels),
    )


def _require_rows(paths, needed: int, what: str) -> None:
    for path in paths:
        rows, _ = read_header(path)
        if rows < needed:
            raise InsufficientViews(
                f"{what} file {path} has {rows} rows, sweep needs at least {needed}"
            )


def ablation_sweep(
    manifest: TaskManifest,
    base_cfg: AwtConfig,
    axis: str,
    values: Sequence,
    jobs: int = 1,
) -> list[EvaluationReport]:
    """Re-evaluate the manifest once per value along one configuration axis."""
    if axis not in SWEEP_AXES:
        raise ShapeMismatch(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ShapeMismatch("sweep needs at least one value")
    if axis == "N":
        _require_rows(
            (e.views_path for e in manifest.images), int(max(values)) + 1, "image views"
        )
    if axis == "M":
        _require_rows(
            (e.embeddings_path for e in manifest.classes), int(max(values)) + 1, "class"
        )

    reports = []
    for value in values:
        if axis == "N":
            cfg = replace(base_cfg, n_image_views=int(value))
        elif axis == "M":
            cfg = replace(base_cfg, m_descriptions=int(value))
        elif axis == "gamma_v":
            cfg = replace(base_cfg, gamma_v=float(value))
        elif axis == "gamma_t":
            cfg = replace(base_cfg, gamma_t=float(value))
        else:
            cfg = replace(base_cfg, sinkhorn=replace(base_cfg.sinkhorn, epsilon=float(value)))
        reports.append(evaluate(manifest, cfg, jobs=jobs))
    return reports
