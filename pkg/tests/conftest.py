import numpy as np
import pytest

from awt.core import CostMatrix, DiscreteMeasure, EmbeddingMatrix


def unit_rows(rng: np.random.Generator, rows: int, dim: int) -> EmbeddingMatrix:
    data = rng.standard_normal((rows, dim))
    data /= np.linalg.norm(data, axis=1, keepdims=True)
    return EmbeddingMatrix(data.astype(np.float32))


def random_instance(rng: np.random.Generator, n: int, m: int):
    """Random transport instance: costs in [0, 2], simplex marginals."""
    C = CostMatrix(rng.uniform(0.0, 2.0, (n, m)).astype(np.float32))
    a = DiscreteMeasure(rng.dirichlet(np.ones(n)))
    b = DiscreteMeasure(rng.dirichlet(np.ones(m)))
    return C, a, b


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def gaussian_task(tmp_path_factory):
    """Well-separated 3-class fixture shared by pipeline and CLI tests."""
    from awt.synthetic import make_gaussian_task

    root = tmp_path_factory.mktemp("gaussian_task")
    return make_gaussian_task(root)
