import math

import numpy as np
import pytest

from awt.core import CostMatrix, DiscreteMeasure, EmbeddingMatrix
from awt.errors import (
    InvalidTemperature,
    NumericalOverflow,
    ShapeMismatch,
    SizeLimitExceeded,
)
from awt.transport import SinkhornConfig, awt_distance, classify_ot, exact_ot, sinkhorn

from conftest import random_instance, unit_rows

TIGHT = SinkhornConfig(epsilon=0.001, max_iterations=200_000, tolerance=1e-9)


def enumerate_2x2_optimum(C, a, b):
    """Vertex enumeration of the 2x2 transportation polytope.

    Plans are parameterized by t = P[0][0] in [max(0, a0 - b1), min(a0, b0)];
    the linear objective is optimized at an endpoint.
    """
    lo = max(0.0, a[0] - b[1])
    hi = min(a[0], b[0])
    best = None
    for t in (lo, hi):
        P = np.array([[t, a[0] - t], [b[0] - t, a[1] - (b[0] - t)]])
        cost = float(np.sum(C * P))
        if best is None or cost < best[0]:
            best = (cost, P)
    return best


class TestSinkhorn:
    def test_1x1_forced_coupling(self):
        r = sinkhorn(
            CostMatrix(np.array([[0.3]], dtype=np.float32)),
            DiscreteMeasure([1.0]),
            DiscreteMeasure([1.0]),
        )
        np.testing.assert_allclose(r.plan.matrix, [[1.0]], atol=1e-12)
        assert r.cost == pytest.approx(0.3, abs=1e-7)
        assert r.plan.converged

    def test_symmetric_2x2_closed_form(self):
        # fixed point is P proportional to exp(-C/eps), row-rescaled to 0.5
        q = math.exp(-1.0 / 0.1)
        off = 0.5 * q / (1.0 + q)
        r = sinkhorn(
            CostMatrix(np.array([[0, 1], [1, 0]], dtype=np.float32)),
            DiscreteMeasure([0.5, 0.5]),
            DiscreteMeasure([0.5, 0.5]),
            SinkhornConfig(epsilon=0.1),
        )
        np.testing.assert_allclose(
            r.plan.matrix, [[0.5 - off, off], [off, 0.5 - off]], atol=1e-9
        )
        assert r.cost == pytest.approx(2 * off, abs=1e-9)
        assert r.cost == pytest.approx(4.5397e-5, abs=1e-9)

    def test_small_epsilon_approaches_exact(self):
        C = CostMatrix(np.array([[0, 2], [1, 0]], dtype=np.float32))
        a = DiscreteMeasure([0.6, 0.4])
        b = DiscreteMeasure([0.5, 0.5])
        expected_cost, _ = enumerate_2x2_optimum(C.values, a.weights, b.weights)
        assert expected_cost == pytest.approx(0.2, abs=1e-7)
        r = sinkhorn(C, a, b, TIGHT)
        assert r.cost == pytest.approx(expected_cost, abs=1e-3)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            sinkhorn(
                CostMatrix(np.zeros((2, 2), dtype=np.float32)),
                DiscreteMeasure([1.0]),
                DiscreteMeasure([0.5, 0.5]),
            )

    def test_overflow_only_in_standard_domain(self):
        C = CostMatrix(np.array([[1.5, 2.0], [0.0, 0.1]], dtype=np.float32))
        a = DiscreteMeasure([0.5, 0.5])
        b = DiscreteMeasure([0.5, 0.5])
        with pytest.raises(NumericalOverflow):
            sinkhorn(C, a, b, SinkhornConfig(epsilon=1e-4, log_domain=False, max_iterations=50))
        r = sinkhorn(C, a, b, SinkhornConfig(epsilon=1e-4, max_iterations=5000, tolerance=1e-8))
        assert np.all(np.isfinite(r.plan.matrix))

    def test_zero_weight_views_masked(self, rng):
        C, _, b = random_instance(rng, 4, 3)
        a = DiscreteMeasure([0.5, 0.0, 0.3, 0.2])
        r = sinkhorn(C, a, b)
        np.testing.assert_array_equal(r.plan.matrix[1], np.zeros(3))
        assert r.plan.total_mass == pytest.approx(1.0, abs=1e-9)

    def test_converged_plans_satisfy_marginals(self, rng):
        for _ in range(20):
            n, m = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            C, a, b = random_instance(rng, n, m)
            r = sinkhorn(C, a, b, SinkhornConfig(epsilon=0.1, max_iterations=5000))
            assert r.plan.converged
            assert r.plan.marginal_violation <= 1e-6
            assert np.all(r.plan.matrix >= 0)
            assert r.plan.total_mass == pytest.approx(1.0, abs=1e-6)
            assert 0.0 <= r.cost <= float(C.values.max())

    def test_cost_dominates_exact(self, rng):
        for _ in range(15):
            n, m = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            C, a, b = random_instance(rng, n, m)
            approx = sinkhorn(C, a, b, TIGHT)
            exact = exact_ot(C, a, b)
            assert approx.cost >= exact.cost - 1e-9

    def test_epsilon_monotonicity(self, rng):
        C, a, b = random_instance(rng, 5, 6)
        costs = [
            sinkhorn(C, a, b, SinkhornConfig(epsilon=e, max_iterations=200_000, tolerance=1e-9)).cost
            for e in (1.0, 0.1, 0.01, 0.001)
        ]
        for hi, lo in zip(costs, costs[1:]):
            assert lo <= hi + 1e-7

    def test_permutation_invariance(self, rng):
        C, a, b = random_instance(rng, 5, 4)
        r = sinkhorn(C, a, b, SinkhornConfig(epsilon=0.1, max_iterations=5000))
        perm = rng.permutation(5)
        rp = sinkhorn(
            CostMatrix(C.values[perm]),
            DiscreteMeasure(a.weights[perm]),
            b,
            SinkhornConfig(epsilon=0.1, max_iterations=5000),
        )
        assert rp.cost == pytest.approx(r.cost, abs=1e-9)

    def test_log_and_standard_domains_agree(self, rng):
        for _ in range(10):
            C, a, b = random_instance(rng, 4, 5)
            cfg = dict(epsilon=0.1, max_iterations=10_000, tolerance=1e-10)
            std = sinkhorn(C, a, b, SinkhornConfig(log_domain=False, **cfg))
            log = sinkhorn(C, a, b, SinkhornConfig(log_domain=True, **cfg))
            assert std.cost == pytest.approx(log.cost, abs=1e-6)

    def test_log_domain_auto_selection(self):
        assert not SinkhornConfig(epsilon=0.1).use_log_domain
        assert SinkhornConfig(epsilon=0.01).use_log_domain
        assert SinkhornConfig(epsilon=0.1, log_domain=True).use_log_domain


class TestExactOt:
    def test_2x2_matches_vertex_enumeration(self):
        C = CostMatrix(np.array([[0, 2], [1, 0]], dtype=np.float32))
        a = DiscreteMeasure([0.6, 0.4])
        b = DiscreteMeasure([0.5, 0.5])
        expected_cost, expected_plan = enumerate_2x2_optimum(C.values, a.weights, b.weights)
        r = exact_ot(C, a, b)
        assert r.cost == pytest.approx(expected_cost, abs=1e-9)
        assert r.cost == pytest.approx(0.2, abs=1e-9)
        np.testing.assert_allclose(r.plan.matrix, expected_plan, atol=1e-9)
        np.testing.assert_allclose(r.plan.matrix, [[0.5, 0.1], [0.0, 0.4]], atol=1e-9)

    def test_single_source_forces_plan(self, rng):
        C, _, b = random_instance(rng, 1, 5)
        a = DiscreteMeasure([1.0])
        r = exact_ot(C, a, b)
        expected = float(np.dot(b.weights, C.values[0].astype(np.float64)))
        assert r.cost == pytest.approx(expected, abs=1e-9)

    def test_identical_rows_make_cost_independent_of_a(self, rng):
        row = rng.uniform(0, 2, 6).astype(np.float32)
        C = CostMatrix(np.tile(row, (4, 1)))
        b = DiscreteMeasure(rng.dirichlet(np.ones(6)))
        expected = float(np.dot(b.weights, row.astype(np.float64)))
        for _ in range(5):
            a = DiscreteMeasure(rng.dirichlet(np.ones(4)))
            assert exact_ot(C, a, b).cost == pytest.approx(expected, abs=1e-9)

    def test_size_limit(self):
        C = CostMatrix(np.zeros((40, 40), dtype=np.float32))
        a = DiscreteMeasure.uniform(40)
        with pytest.raises(SizeLimitExceeded):
            exact_ot(C, a, a)


class TestAwtDistance:
    def test_equal_pair_is_free(self):
        v = EmbeddingMatrix(np.array([[1.0, 0.0]], dtype=np.float32))
        r = awt_distance(v, DiscreteMeasure([1.0]), v, DiscreteMeasure([1.0]))
        assert r.cost == pytest.approx(0.0, abs=1e-7)

    def test_orthogonal_pair_costs_one(self):
        v = EmbeddingMatrix(np.array([[1.0, 0.0]], dtype=np.float32))
        w = EmbeddingMatrix(np.array([[0.0, 1.0]], dtype=np.float32))
        r = awt_distance(v, DiscreteMeasure([1.0]), w, DiscreteMeasure([1.0]))
        assert r.cost == pytest.approx(1.0, abs=1e-7)

    def test_identical_views_constant_cost(self):
        # both views at cos 0.8 from the single description: all mass pays 0.2
        x = np.array([[0.8, 0.6], [0.8, 0.6]], dtype=np.float32)
        d = np.array([[1.0, 0.0]], dtype=np.float32)
        r = awt_distance(
            EmbeddingMatrix(x),
            DiscreteMeasure([0.5, 0.5]),
            EmbeddingMatrix(d),
            DiscreteMeasure([1.0]),
        )
        assert r.cost == pytest.approx(0.2, abs=1e-6)


class TestClassifyOt:
    def test_symmetric_costs(self):
        out = classify_ot(np.array([0.2, 0.2]), tau=0.01)
        np.testing.assert_allclose(out.probs, [0.5, 0.5], atol=1e-12)

    def test_dominant_gap(self):
        out = classify_ot(np.array([0.0, 2.0]), tau=0.01)
        assert out.argmax == 0
        assert out.probs[0] > 1 - 1e-12

    def test_derived_softmax_example(self):
        exps = [math.exp(-0.1), math.exp(-0.3)]
        expected = [e / sum(exps) for e in exps]
        out = classify_ot(np.array([0.1, 0.3]), tau=1.0)
        np.testing.assert_allclose(out.probs, expected, atol=1e-12)
        np.testing.assert_allclose(out.probs, [0.54983, 0.45017], atol=5e-6)

    def test_lower_cost_wins_and_ties_break_low(self):
        assert classify_ot(np.array([0.4, 0.1, 0.9]), tau=0.5).argmax == 1
        assert classify_ot(np.array([0.3, 0.3]), tau=0.5).argmax == 0

    def test_invalid_temperature(self):
        with pytest.raises(InvalidTemperature):
            classify_ot(np.array([0.1]), tau=-1.0)

    def test_single_view_reduction_matches_cosine(self, rng):
        """With one view and one description per class the argmax must match."""
        from awt.weighting import classify_cosine

        x = unit_rows(rng, 1, 12)
        classes = [unit_rows(rng, 1, 12) for _ in range(4)]
        costs = [
            awt_distance(x, DiscreteMeasure([1.0]), c, DiscreteMeasure([1.0])).cost
            for c in classes
        ]
        ot_out = classify_ot(np.array(costs), tau=0.01)
        cos_out = classify_cosine(
            x.data[0], EmbeddingMatrix(np.vstack([c.data for c in classes])), tau=0.01
        )
        assert ot_out.argmax == cos_out.argmax
