"""Shared numerical data model: embedding matrices, measures, costs, plans.

Storage is float32, matching upstream feature extractors; every reduction
(norms, dot products, means) accumulates in float64.  All types are frozen
and hold read-only arrays, so instances can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch, ZeroNormRow

_ZERO_NORM = 1e-12
# Rows whose norm is already this close to 1 are left untouched, which makes
# normalize_rows bit-idempotent.
_UNIT_SLACK = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-major matrix of feature vectors, one view or description per row."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ShapeMismatch(f"embedding matrix must be 2-D and nonempty, got shape {a.shape}")
        if a.dtype != np.float32:
            a = a.astype(np.float32)
        a = np.ascontiguousarray(a)
        if not np.all(np.isfinite(a)):
            raise ShapeMismatch("embedding matrix contains non-finite entries")
        object.__setattr__(self, "data", _readonly(a))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def take_rows(self, count: int) -> "EmbeddingMatrix":
        """First `count` rows (row 0, the original view, always included)."""
        if count == self.rows:
            return self
        return EmbeddingMatrix(self.data[:count])

    def is_row_normalized(self, tol: float = 1e-4) -> bool:
        norms = np.sqrt(np.einsum("ij,ij->i", self.data, self.data, dtype=np.float64))
        return bool(np.all(np.abs(norms - 1.0) <= tol))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability weights over the rows of an associated embedding matrix."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 1 or w.size < 1:
            raise ShapeMismatch(f"measure must be a nonempty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ShapeMismatch("measure weights must be finite and nonnegative")
        total = float(np.sum(w))
        if abs(total - 1.0) > 1e-9:
            raise ShapeMismatch(f"measure weights sum to {total}, expected 1")
        object.__setattr__(self, "weights", _readonly(w))

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise transport costs; cosine distances live in [0, 2]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeMismatch(f"cost matrix must be 2-D and nonempty, got shape {v.shape}")
        if v.dtype != np.float32:
            v = v.astype(np.float32)
        v = np.ascontiguousarray(v)
        if not np.all(np.isfinite(v)):
            raise ShapeMismatch("cost matrix contains non-finite entries")
        if float(v.min()) < 0.0 or float(v.max()) > 2.0:
            raise ShapeMismatch("cost entries must lie in [0, 2]")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class TransportPlan:
    """Coupling matrix plus solver diagnostics."""

    matrix: np.ndarray
    converged: bool
    iterations: int
    marginal_violation: float

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.matrix))


@dataclass(frozen=True)
class OtResult:
    """Transport cost at the returned plan (the plain linear objective)."""

    cost: float
    plan: TransportPlan = field(repr=False)


def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm.

    Rows already within 1e-6 of unit length are returned bit-identically,
    so the operation is idempotent.  Raises ZeroNormRow for degenerate rows.
    """
    data = m.data
    norms = np.sqrt(np.einsum("ij,ij->i", data, data, dtype=np.float64))
    small = np.flatnonzero(norms < _ZERO_NORM)
    if small.size:
        raise ZeroNormRow(int(small[0]))
    needs = np.abs(norms - 1.0) > _UNIT_SLACK
    if not np.any(needs):
        return m
    out = np.array(data, copy=True)
    scaled = data[needs].astype(np.float64) / norms[needs, None]
    out[needs] = scaled.astype(np.float32)
    return EmbeddingMatrix(out)


def cosine_cost(img: EmbeddingMatrix, txt: EmbeddingMatrix) -> CostMatrix:
    """Cosine-distance matrix between two row-normalized embedding sets.

    Entry (n, m) is 1 minus the dot product of image row n and text row m;
    with unit rows that is exactly one minus their cosine similarity.
    """
    if img.dim != txt.dim:
        raise DimensionMismatch(f"image dim {img.dim} != text dim {txt.dim}")
    sims = img.data.astype(np.float64) @ txt.data.astype(np.float64).T
    costs = np.clip(1.0 - sims, 0.0, 2.0)
    return CostMatrix(costs.astype(np.float32))


def mean_embedding(m: EmbeddingMatrix, renormalize: bool = True) -> np.ndarray:
    """Arithmetic mean of all rows, re-normalized to unit length by default.

    Raises ZeroNormRow when the rows cancel to a numerically zero mean.
    """
    mean = np.mean(m.data.astype(np.float64), axis=0)
    norm = float(np.sqrt(np.dot(mean, mean)))
    if renormalize:
        if norm < _ZERO_NORM:
            raise ZeroNormRow(0)
        mean = mean / norm
    return mean.astype(np.float32)


def mean_embedding_matrix(mats: list[EmbeddingMatrix], renormalize: bool = True) -> EmbeddingMatrix:
    """Stack the per-matrix mean embeddings into one matrix (one row each)."""
    if not mats:
        raise ShapeMismatch("need at least one embedding matrix")
    return EmbeddingMatrix(np.stack([mean_embedding(m, renormalize) for m in mats]))
