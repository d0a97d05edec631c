"""Softmax classification over cosine similarities and entropy-based view weights.

The image side scores every augmented view against the per-class mean
description embeddings; the text side scores the original view against one
candidate description plus the other classes' means.  Lower prediction
entropy means higher confidence, so views are weighted by a softmax over
negative entropy with a temperature knob.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DiscreteMeasure, EmbeddingMatrix
from .errors import DimensionMismatch, InvalidTemperature, TooFewClasses


@dataclass(frozen=True)
class ClassProbabilities:
    """Softmax output over candidate classes plus the raw scaled logits."""

    probs: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.probs, dtype=np.float64))
        l = np.ascontiguousarray(np.asarray(self.logits, dtype=np.float64))
        p.setflags(write=False)
        l.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "logits", l)

    @property
    def argmax(self) -> int:
        # np.argmax keeps the lowest index on ties, which is the contract.
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class ViewWeights:
    """Importance weights for a view set with the entropies they came from."""

    weights: DiscreteMeasure
    entropies: np.ndarray

    def __post_init__(self):
        h = np.ascontiguousarray(np.asarray(self.entropies, dtype=np.float64))
        h.setflags(write=False)
        object.__setattr__(self, "entropies", h)


def softmax(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction) in float64."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(x - np.max(x))
    return z / np.sum(z)


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - np.max(x, axis=1, keepdims=True))
    return z / np.sum(z, axis=1, keepdims=True)


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 * log(0) taken as 0."""
    probs = p.probs if isinstance(p, ClassProbabilities) else np.asarray(p, dtype=np.float64)
    nz = probs[probs > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -np.sum(plogp, axis=1)


def _check_temperature(value: float, name: str) -> None:
    if not (value > 0.0 and np.isfinite(value)):
        raise InvalidTemperature(f"{name} must be positive and finite, got {value}")


def classify_cosine(
    image_emb: np.ndarray, class_embs: EmbeddingMatrix, tau: float
) -> ClassProbabilities:
    """Softmax over cosine similarities between one embedding and class rows.

    Rows are assumed unit-norm, so the similarity is a plain dot product.
    """
    _check_temperature(tau, "tau")
    emb = np.asarray(image_emb, dtype=np.float64).ravel()
    if emb.size != class_embs.dim:
        raise DimensionMismatch(f"image dim {emb.size} != class dim {class_embs.dim}")
    logits = (class_embs.data.astype(np.float64) @ emb) / tau
    return ClassProbabilities(softmax(logits), logits)


def entropy_weights(entropies: np.ndarray, gamma: float) -> DiscreteMeasure:
    """Softmax over negative entropies with temperature gamma."""
    _check_temperature(gamma, "gamma")
    return DiscreteMeasure(softmax(-np.asarray(entropies, dtype=np.float64) / gamma))


def weight_image_views(
    views: EmbeddingMatrix,
    class_mean_embs: EmbeddingMatrix,
    gamma_v: float,
    tau: float,
) -> ViewWeights:
    """Importance of each image view from its prediction entropy.

    Every view is classified against the fixed averaged class embeddings;
    the resulting entropies are turned into weights via a negative-entropy
    softmax at temperature gamma_v.
    """
    if class_mean_embs.rows < 2:
        raise TooFewClasses("image-view weighting needs at least 2 classes")
    if views.dim != class_mean_embs.dim:
        raise DimensionMismatch(f"view dim {views.dim} != class dim {class_mean_embs.dim}")
    _check_temperature(tau, "tau")
    logits = (views.data.astype(np.float64) @ class_mean_embs.data.astype(np.float64).T) / tau
    entropies = _entropy_rows(_softmax_rows(logits))
    return ViewWeights(entropy_weights(entropies, gamma_v), entropies)


def weight_class_descriptions(
    original_image_emb: np.ndarray,
    desc_embs: EmbeddingMatrix,
    other_class_means: EmbeddingMatrix | None,
    gamma_t: float,
    tau: float,
) -> ViewWeights:
    """Importance of each description of one class, judged on the original view.

    For description m the candidate set is that single description plus the
    mean embeddings of every other class; only the original (unaugmented)
    image view is classified.  other_class_means must hold C-1 rows.
    """
    if other_class_means is None or other_class_means.rows < 1:
        raise TooFewClasses("description weighting needs at least 2 classes")
    if desc_embs.dim != other_class_means.dim:
        raise DimensionMismatch(
            f"description dim {desc_embs.dim} != class-mean dim {other_class_means.dim}"
        )
    _check_temperature(tau, "tau")
    emb = np.asarray(original_image_emb, dtype=np.float64).ravel()
    if emb.size != desc_embs.dim:
        raise DimensionMismatch(f"image dim {emb.size} != description dim {desc_embs.dim}")
    own = (desc_embs.data.astype(np.float64) @ emb) / tau
    others = (other_class_means.data.astype(np.float64) @ emb) / tau
    logits = np.concatenate(
        [own[:, None], np.broadcast_to(others, (own.size, others.size))], axis=1
    )
    entropies = _entropy_rows(_softmax_rows(logits))
    return ViewWeights(entropy_weights(entropies, gamma_t), entropies)
