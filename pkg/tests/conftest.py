import numpy as np
import pytest

from corepick import EmbeddingMatrix


def unit_rows(n, d, seed=0):
    """Random unit-norm float32 rows."""
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((n, d))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows.astype(np.float32)


def sphere_mixture(n, d, weights, spread=0.25, seed=0):
    """Clustered unit vectors: per-component mean direction plus noise.

    Returns (matrix, labels) where labels hold the generating component.
    """
    rng = np.random.default_rng(seed)
    weights = np.asarray(weights, dtype=np.float64)
    weights = weights / weights.sum()
    centers = rng.standard_normal((len(weights), d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.choice(len(weights), size=n, p=weights)
    points = centers[labels] + spread * rng.standard_normal((n, d))
    return EmbeddingMatrix.from_array(points), labels


@pytest.fixture
def tiny_matrix():
    return EmbeddingMatrix.from_array(unit_rows(40, 6, seed=1), normalized=False)
