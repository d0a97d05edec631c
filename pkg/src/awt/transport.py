"""Entropy-regularized transport between weighted view sets.

sinkhorn() approximates the minimal-cost coupling by alternating scaling
sweeps on the Gibbs kernel; exact_ot() solves the same linear program
exactly at desk scale and serves as the verification oracle.  Both report
the plain linear objective <C, P> at the returned plan, which is what the
classifier consumes as an image-to-class distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import CostMatrix, DiscreteMeasure, EmbeddingMatrix, OtResult, TransportPlan, cosine_cost
from .errors import (
    AwtError,
    InvalidTemperature,
    NumericalOverflow,
    ShapeMismatch,
    SizeLimitExceeded,
)
from .weighting import ClassProbabilities, softmax

_MASS_FLOOR = 1e-12
_LOG_DOMAIN_BELOW = 0.05
EXACT_SIZE_LIMIT = 64


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver knobs; tolerance is the max marginal violation for convergence."""

    epsilon: float = 0.1
    max_iterations: int = 100
    tolerance: float = 1e-6
    log_domain: bool | None = None

    def __post_init__(self):
        if not (self.epsilon > 0.0 and np.isfinite(self.epsilon)):
            raise ShapeMismatch(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ShapeMismatch(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not (self.tolerance > 0.0):
            raise ShapeMismatch(f"tolerance must be positive, got {self.tolerance}")

    @property
    def use_log_domain(self) -> bool:
        if self.log_domain is None:
            return self.epsilon < _LOG_DOMAIN_BELOW
        return self.log_domain


def _check_shapes(C: CostMatrix, a: DiscreteMeasure, b: DiscreteMeasure) -> None:
    n, m = C.shape
    if len(a) != n or len(b) != m:
        raise ShapeMismatch(f"cost is {n}x{m} but measures have sizes {len(a)}, {len(b)}")


def _round_to_marginals(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Project an almost-feasible plan onto the exact marginal polytope.

    Rows then columns are scaled down to never exceed their targets and the
    remaining mass deficit is spread as a rank-one update, so the result is
    a nonnegative coupling with row sums a and column sums b.
    """
    rows = P.sum(axis=1)
    scale = np.where(rows > 0, np.minimum(1.0, a / np.where(rows > 0, rows, 1.0)), 1.0)
    P = P * scale[:, None]
    cols = P.sum(axis=0)
    scale = np.where(cols > 0, np.minimum(1.0, b / np.where(cols > 0, cols, 1.0)), 1.0)
    P = P * scale[None, :]
    # deficits are nonnegative up to float rounding; clamp so the rank-one
    # correction cannot push entries below zero
    err_a = np.maximum(a - P.sum(axis=1), 0.0)
    err_b = np.maximum(b - P.sum(axis=0), 0.0)
    total = err_a.sum()
    if total > 0:
        P = P + np.outer(err_a, err_b) / total
    return np.maximum(P, 0.0)


def _violation(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    row = np.max(np.abs(P.sum(axis=1) - a))
    col = np.max(np.abs(P.sum(axis=0) - b))
    return float(max(row, col))


def sinkhorn(
    C: CostMatrix,
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    cfg: SinkhornConfig = SinkhornConfig(),
) -> OtResult:
    """Approximate the optimal coupling of (a, b) under costs C.

    Zero-weight rows/columns are masked out before iterating and restored
    as exact zeros.  The converged iterate is projected onto the marginal
    polytope, so returned plans are feasible couplings regardless of the
    achieved tolerance; `converged` reports whether the iteration itself
    reached cfg.tolerance within cfg.max_iterations.

    Raises NumericalOverflow when a standard-domain scaling factor leaves
    the float range (not reachable in the log-domain path).
    """
    _check_shapes(C, a, b)
    C64 = C.values.astype(np.float64)
    aw = a.weights
    bw = b.weights
    keep_r = aw > _MASS_FLOOR
    keep_c = bw > _MASS_FLOOR
    sub_C = C64[np.ix_(keep_r, keep_c)]
    sub_a = aw[keep_r]
    sub_b = bw[keep_c]

    kernel = _kernels.sinkhorn_log if cfg.use_log_domain else _kernels.sinkhorn_std
    sub_P, iterations, achieved, overflow = kernel(
        sub_C, sub_a, sub_b, float(cfg.epsilon), int(cfg.max_iterations), float(cfg.tolerance)
    )
    if overflow:
        raise NumericalOverflow(
            f"scaling factors overflowed at epsilon={cfg.epsilon}; use the log-domain solver"
        )
    sub_P = _round_to_marginals(sub_P, sub_a, sub_b)

    P = np.zeros_like(C64)
    P[np.ix_(keep_r, keep_c)] = sub_P
    plan = TransportPlan(
        matrix=P,
        converged=bool(achieved <= cfg.tolerance),
        iterations=int(iterations),
        marginal_violation=_violation(P, aw, bw),
    )
    cost = float(np.sum(C64 * P))
    return OtResult(cost=cost, plan=plan)


def exact_ot(C: CostMatrix, a: DiscreteMeasure, b: DiscreteMeasure) -> OtResult:
    """Exact transportation optimum via the LP solver; verification oracle.

    Restricted to |a| + |b| <= 64: this is a desk-scale reference, not the
    production path.  Returns an optimal vertex plan.
    """
    _check_shapes(C, a, b)
    n, m = C.shape
    if n + m > EXACT_SIZE_LIMIT:
        raise SizeLimitExceeded(f"exact solver limited to {EXACT_SIZE_LIMIT} total points")
    from scipy.optimize import linprog

    C64 = C.values.astype(np.float64)
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    rhs = np.concatenate([a.weights, b.weights])
    res = linprog(C64.ravel(), A_eq=A_eq, b_eq=rhs, bounds=(0, None), method="highs")
    if res.status != 0:
        raise AwtError(f"transportation LP failed: {res.message}")
    P = np.maximum(res.x.reshape(n, m), 0.0)
    plan = TransportPlan(
        matrix=P,
        converged=True,
        iterations=int(getattr(res, "nit", 0)),
        marginal_violation=_violation(P, a.weights, b.weights),
    )
    return OtResult(cost=float(np.sum(C64 * P)), plan=plan)


def awt_distance(
    img_views: EmbeddingMatrix,
    a: DiscreteMeasure,
    desc_views: EmbeddingMatrix,
    b: DiscreteMeasure,
    cfg: SinkhornConfig = SinkhornConfig(),
) -> OtResult:
    """Transport distance between weighted image views and class descriptions."""
    return sinkhorn(cosine_cost(img_views, desc_views), a, b, cfg)


def classify_ot(ot_costs: np.ndarray, tau: float) -> ClassProbabilities:
    """Softmax over negative transport costs scaled by 1/tau.

    Smaller distance means higher probability; the argmax is the class with
    the minimal transport cost, ties broken toward the lowest index.
    """
    if not (tau > 0.0 and np.isfinite(tau)):
        raise InvalidTemperature(f"tau must be positive and finite, got {tau}")
    costs = np.asarray(ot_costs, dtype=np.float64).ravel()
    if costs.size < 1:
        raise ShapeMismatch("need at least one class cost")
    logits = -costs / tau
    return ClassProbabilities(softmax(logits), logits)
