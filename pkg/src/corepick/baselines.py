"""Reference selectors that need no trained scorer: uniform random,
farthest-point (k-center) greedy, and top-m by an externally supplied score."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import InputError, StorageError
from .selector import SelectionResult, SelectorConfig

DIRECTIONS = ("descending", "ascending")


@dataclass
class ScoreFile:
    """Per-row scores aligned to embedding row order."""

    scores: np.ndarray
    direction: str = "descending"

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1 or self.scores.size < 1:
            raise InputError("scores-shape", "scores must be a non-empty 1-D sequence")
        if not np.isfinite(self.scores).all():
            bad = int(np.flatnonzero(~np.isfinite(self.scores))[0])
            raise InputError("scores-nonfinite", f"non-finite score at row {bad}")
        if self.direction not in DIRECTIONS:
            raise InputError("scores-direction", f"direction must be one of {DIRECTIONS}")


def load_score_file(path, n: int | None = None, direction: str = "descending") -> ScoreFile:
    """Read scores from JSONL ``{id, score}`` lines or a flat one-per-line file.

    Ids in the JSONL form are row indices and must cover 0..n-1 exactly once.
    """
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as exc:
        raise StorageError("scores-unreadable", f"cannot read {path}: {exc}")
    if not lines:
        raise InputError("scores-empty", f"{path}: no scores")
    if lines[0].lstrip().startswith("{"):
        pairs = {}
        for lineno, line in enumerate(lines, start=1):
            try:
                obj = json.loads(line)
                row, score = int(obj["id"]), float(obj["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise InputError("scores-malformed", f"{path} line {lineno}: expected {{id, score}}")
            if row in pairs:
                raise InputError("scores-malformed", f"{path} line {lineno}: duplicate id {row}")
            pairs[row] = score
        count = len(pairs)
        if sorted(pairs) != list(range(count)):
            raise InputError("scores-coverage", f"{path}: ids must cover 0..{count - 1} exactly once")
        values = np.array([pairs[i] for i in range(count)])
    else:
        try:
            values = np.array([float(ln) for ln in lines])
        except ValueError:
            raise InputError("scores-malformed", f"{path}: expected one numeric score per line")
    if n is not None and values.size != n:
        raise InputError("scores-length", f"{path}: {values.size} scores for {n} rows")
    return ScoreFile(scores=values, direction=direction)


def _check_budget(n: int, m: int) -> None:
    if n < 1:
        raise InputError("config-budget", "dataset is empty")
    if m < 1 or m > n:
        raise InputError("config-budget", f"budget must be in [1, {n}], got {m}")


def random_select(n: int, m: int, seed: int = 0) -> SelectionResult:
    """Uniform sample of m distinct row indices, deterministic per seed."""
    _check_budget(n, m)
    rng = np.random.default_rng(seed)
    picks = rng.choice(n, size=m, replace=False)
    return SelectionResult(
        indices=[int(i) for i in picks],
        match_similarity=[1.0] * m,
        config=SelectorConfig(budget=m, seed=seed),
        method="random",
    )


def kcenter_select(matrix: EmbeddingMatrix, m: int, seed: int = 0) -> SelectionResult:
    """Farthest-point greedy under cosine distance (1 - dot).

    The first center is drawn uniformly by seed; every further center is the
    point with the largest distance to its nearest chosen center, ties going
    to the smallest row index. ``match_similarity[t]`` records 1 minus the
    selected point's distance to the nearest earlier center (-1.0 for the
    first pick), so the logged distance sequence is non-increasing.
    """
    _check_budget(matrix.n, m)
    rng = np.random.default_rng(seed)
    first = int(rng.integers(matrix.n))
    chosen = np.empty(m, dtype=np.int64)
    gaps = np.empty(m, dtype=np.float64)
    chosen[0], gaps[0] = first, 2.0
    data = matrix.data
    nearest = 1.0 - (data @ data[first]).astype(np.float64)
    nearest[first] = -np.inf
    for t in range(1, m):
        nxt = int(np.argmax(nearest))
        # float32 self-similarity can exceed 1 by rounding; keep distances in [0, 2]
        chosen[t], gaps[t] = nxt, min(2.0, max(0.0, nearest[nxt]))
        dist = 1.0 - (data @ data[nxt]).astype(np.float64)
        np.minimum(nearest, dist, out=nearest)
        nearest[nxt] = -np.inf
    return SelectionResult(
        indices=[int(i) for i in chosen],
        match_similarity=[float(1.0 - g) for g in gaps],
        config=SelectorConfig(budget=m, seed=seed),
        method="kcenter",
    )


def score_select(scores: ScoreFile, m: int) -> SelectionResult:
    """Top-m rows by score in the file's direction; ties keep the smaller index."""
    n = scores.scores.size
    _check_budget(n, m)
    key = -scores.scores if scores.direction == "descending" else scores.scores
    order = np.argsort(key, kind="stable")
    picks = order[:m]
    return SelectionResult(
        indices=[int(i) for i in picks],
        match_similarity=[1.0] * m,
        config=SelectorConfig(budget=m),
        method="score",
    )
