"""Subset quality measures (coverage, pairwise diversity) and the pass@k
estimator for execution-based evaluation results."""

from __future__ import annotations

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import InputError

_ROW_CHUNK = 2048


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k draws from n samples (c correct)
    passes, i.e. 1 - C(n-c, k)/C(n, k), computed in the stable product form."""
    n, c, k = int(n), int(c), int(k)
    if n < 1:
        raise InputError("passk-domain", f"n must be >= 1, got {n}")
    if not 0 <= c <= n:
        raise InputError("passk-domain", f"c must lie in [0, {n}], got {c}")
    if not 1 <= k <= n:
        raise InputError("passk-domain", f"k must lie in [1, {n}], got {k}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    return float(1.0 - np.prod(1.0 - k / np.arange(n - c + 1, n + 1, dtype=np.float64)))


def mean_pass_at_k(counts, k: int):
    """pass@k per (n, c) problem plus the mean over problems."""
    values = [pass_at_k(n, c, k) for n, c in counts]
    if not values:
        raise InputError("passk-empty", "no problems supplied")
    return values, float(np.mean(values))


def _validated_indices(matrix: EmbeddingMatrix, indices, minimum: int) -> np.ndarray:
    picks = np.asarray(list(indices), dtype=np.int64)
    if picks.size < minimum:
        raise InputError("diagnose-indices", f"need at least {minimum} selected indices")
    if picks.size and (picks.min() < 0 or picks.max() >= matrix.n):
        raise InputError("diagnose-index", f"index out of range for n={matrix.n}")
    if np.unique(picks).size != picks.size:
        raise InputError("diagnose-indices", "selected indices must be distinct")
    # sorted so the statistics are exactly invariant to the input order
    return np.sort(picks)


def coverage(matrix: EmbeddingMatrix, indices) -> float:
    """Mean over all rows of the best cosine similarity to the selected rows.

    1.0 when the selection contains every row; reported unscaled (no
    temperature) so values read as cosines.
    """
    picks = _validated_indices(matrix, indices, minimum=1)
    chosen = matrix.data[picks].astype(np.float64)
    total = 0.0
    for lo in range(0, matrix.n, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, matrix.n)
        sims = matrix.data[lo:hi].astype(np.float64) @ chosen.T
        total += float(sims.max(axis=1).sum())
    return total / matrix.n


def diversity(matrix: EmbeddingMatrix, indices) -> dict:
    """Exact pairwise similarity statistics over the selected rows."""
    picks = _validated_indices(matrix, indices, minimum=2)
    chosen = matrix.data[picks].astype(np.float64)
    s = picks.size
    col = np.arange(s)
    total = 0.0
    top = -np.inf
    for lo in range(0, s, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, s)
        sims = chosen[lo:hi] @ chosen.T
        above = col[None, :] > np.arange(lo, hi)[:, None]
        total += float(np.where(above, sims, 0.0).sum())
        top = max(top, float(np.where(above, sims, -np.inf).max()))
    pairs = s * (s - 1) // 2
    return {
        "mean_pairwise_sim": total / pairs,
        "max_pairwise_sim": top,
        "min_pairwise_dist": 1.0 - top,
    }
