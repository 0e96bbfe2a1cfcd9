"""Parametric subset selection on the unit sphere.

A budget of m free unit-norm vectors is initialized from sampled feature rows
and optimized so that (a) every dataset feature has a nearby parameter and
(b) parameters repel each other; afterwards each parameter is matched back to
a distinct real row. Loss per iteration:

    total = -(1/n) * sum_i max_j <f_i, p_j>/tau
            + (w/m) * sum_j log sum_{k != j} exp(<p_j, p_k>/tau)

with w the diversity weight. The matching term's argmax assignment is held
fixed within an iteration, which makes the gradient analytic (the assignment
is piecewise constant in the parameters).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .embeddings import EmbeddingMatrix, scaled_params, sim_chunked, _CHUNK
from .errors import InputError

OPTIMIZERS = ("adam", "sgd")

# Above this work size (n*m*d or m*m*d products per pass) the similarity
# products drop to float32; reductions stay in float64 either way.
_WIDE_WORK_LIMIT = 1_000_000_000


def _auto_dtype(n: int, m: int, d: int) -> np.dtype:
    work = max(n * m * d, m * m * d)
    return np.dtype(np.float64) if work <= _WIDE_WORK_LIMIT else np.dtype(np.float32)


@dataclass(frozen=True)
class SelectorConfig:
    """Knobs for one selection run; defaults follow the reference recipe."""

    budget: int
    temperature: float = 0.07
    diversity_weight: float = 1.0
    learning_rate: float = 0.001
    iterations: int = 300
    seed: int = 0
    block_size: int = 4096
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if self.budget < 1:
            raise InputError("config-budget", f"budget must be >= 1, got {self.budget}")
        if not self.temperature > 0:
            raise InputError("config-tau", f"tau must be positive, got {self.temperature}")
        if self.diversity_weight < 0:
            raise InputError("config-lambda", f"lambda must be >= 0, got {self.diversity_weight}")
        if not self.learning_rate > 0:
            raise InputError("config-lr", f"learning rate must be positive, got {self.learning_rate}")
        if self.iterations < 1:
            raise InputError("config-iters", f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.seed < 2**64:
            raise InputError("config-seed", f"seed must fit u64, got {self.seed}")
        if self.block_size < 1:
            raise InputError("config-block-size", f"block size must be >= 1, got {self.block_size}")
        if self.optimizer not in OPTIMIZERS:
            raise InputError("config-optimizer", f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise InputError("config-adam", "Adam betas must lie in [0, 1)")
        if not self.adam_epsilon > 0:
            raise InputError("config-adam", "Adam epsilon must be positive")

    def to_json_dict(self) -> dict:
        return {
            "m": self.budget,
            "tau": self.temperature,
            "lambda": self.diversity_weight,
            "lr": self.learning_rate,
            "T": self.iterations,
            "seed": self.seed,
        }


@dataclass
class LossRecord:
    """Loss at the start of one iteration, split into its two terms.

    ``total = match_term - weight * diversity_term``; the diversity term is
    the (negative) mean log-sum-exp of pairwise parameter similarities.
    """

    iteration: int
    total: float
    match_term: float
    diversity_term: float

    def to_json_dict(self) -> dict:
        return {"iter": self.iteration, "L": self.total, "M": self.match_term, "R": self.diversity_term}


@dataclass
class ParamState:
    """Optimizer state: unit-norm parameter rows plus Adam moment buffers."""

    params: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    iteration: int = 0
    loss_history: list[LossRecord] = field(default_factory=list)


@dataclass
class SelectionResult:
    """Chosen row indices with per-index match similarity and run metadata.

    ``indices[j]`` is the dataset row matched to parameter j (or simply the
    j-th pick for baseline methods); ``match_similarity[j]`` is the cosine
    similarity achieved by that pick.
    """

    indices: list[int]
    match_similarity: list[float]
    config: SelectorConfig
    method: str
    wall_time: float = 0.0
    loss_history: list[LossRecord] = field(default_factory=list)

    def to_json_dict(self, include_timing: bool = True) -> dict:
        return {
            "method": self.method,
            "config": self.config.to_json_dict(),
            "indices": [int(i) for i in self.indices],
            "match_similarity": [float(s) for s in self.match_similarity],
            "loss_history": [rec.to_json_dict() for rec in self.loss_history],
            "wall_time_s": float(self.wall_time) if include_timing else 0.0,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SelectionResult":
        cfg = doc.get("config", {})
        config = SelectorConfig(
            budget=int(cfg.get("m", len(doc["indices"]))),
            temperature=float(cfg.get("tau", 0.07)),
            diversity_weight=float(cfg.get("lambda", 1.0)),
            learning_rate=float(cfg.get("lr", 0.001)),
            iterations=int(cfg.get("T", 300)),
            seed=int(cfg.get("seed", 0)),
        )
        history = [
            LossRecord(iteration=int(r["iter"]), total=float(r["L"]),
                       match_term=float(r["M"]), diversity_term=float(r["R"]))
            for r in doc.get("loss_history", [])
        ]
        return cls(
            indices=[int(i) for i in doc["indices"]],
            match_similarity=[float(s) for s in doc.get("match_similarity", [])],
            config=config,
            method=str(doc.get("method", "unknown")),
            wall_time=float(doc.get("wall_time_s", 0.0)),
            loss_history=history,
        )


def init_params(matrix: EmbeddingMatrix, config: SelectorConfig) -> ParamState:
    """Start from ``budget`` distinct feature rows sampled without replacement."""
    m = config.budget
    if m > matrix.n:
        raise InputError("config-budget", f"budget {m} exceeds dataset size {matrix.n}")
    rng = np.random.default_rng(config.seed)
    picks = rng.choice(matrix.n, size=m, replace=False)
    params = matrix.data[picks].astype(np.float64)
    params /= np.linalg.norm(params, axis=1)[:, None]
    return ParamState(
        params=params,
        adam_m=np.zeros_like(params),
        adam_v=np.zeros_like(params),
    )


def compute_assignments(matrix: EmbeddingMatrix, params: np.ndarray, tau: float,
                        block_size: int = 4096, dtype=None):
    """Nearest parameter per dataset row under the scaled dot similarity.

    Returns ``(owner, best)`` where ``owner[i]`` is the argmax parameter index
    (ties resolved to the smallest index) and ``best[i]`` the attained value
    dot(f_i, p)/tau. Results do not depend on ``block_size``.
    """
    params = np.asarray(params)
    if params.ndim != 2 or params.shape[1] != matrix.d:
        raise InputError("similarity-dim", f"parameter shape {params.shape} does not match d={matrix.d}")
    if not tau > 0:
        raise InputError("similarity-tau", f"tau must be positive, got {tau}")
    n, m = matrix.n, params.shape[0]
    dtype = _auto_dtype(n, m, matrix.d) if dtype is None else np.dtype(dtype)
    params_t = scaled_params(params, tau, dtype)
    owner = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    chunk_buf = np.zeros((_CHUNK, matrix.d), dtype=dtype)
    prod_buf = np.empty((_CHUNK, m), dtype=dtype)
    block = np.empty((min(block_size, n), m), dtype=dtype)
    for lo in range(0, n, block_size):
        hi = min(lo + block_size, n)
        rows = block[: hi - lo]
        sim_chunked(matrix.data, params_t, lo, hi, rows, chunk_buf, prod_buf)
        picks = np.argmax(rows, axis=1)
        owner[lo:hi] = picks
        best[lo:hi] = np.take_along_axis(rows, picks[:, None], axis=1)[:, 0]
    return owner, best


def _pairwise_stats(params: np.ndarray, tau: float, dtype, need_weights: bool):
    """Diversity term and (optionally) the pairwise softmax weight matrix.

    The term is -(1/m) sum_j log sum_{k != j} exp(<p_j, p_k>/tau), evaluated
    with max-subtraction. ``weights[j, k] = exp(<p_j,p_k>/tau) / row sum`` with
    a zero diagonal; rows sum to 1.
    """
    m = params.shape[0]
    if m < 2:
        raise InputError("loss-budget", "the diversity term needs at least 2 parameters")
    cast = np.asarray(params, dtype=dtype)
    pair = np.matmul(cast / dtype.type(tau), cast.T)
    np.fill_diagonal(pair, -np.inf)
    row_max = pair.max(axis=1).astype(np.float64)
    log_sums = np.empty(m, dtype=np.float64)
    span = max(1, min(m, 2**22 // max(m, 1) + 1))
    for lo in range(0, m, span):
        hi = min(lo + span, m)
        rows = pair[lo:hi].astype(np.float64)
        rows -= row_max[lo:hi, None]
        np.exp(rows, out=rows)
        totals = rows.sum(axis=1)
        log_sums[lo:hi] = np.log(totals) + row_max[lo:hi]
        if need_weights:
            rows /= totals[:, None]
            pair[lo:hi] = rows
    term = -float(log_sums.mean())
    return term, (pair if need_weights else None)


def loss(matrix: EmbeddingMatrix, params: np.ndarray, config: SelectorConfig, dtype=None):
    """Evaluate the joint loss at ``params``.

    Returns ``(total, match_term, diversity_term)`` with
    ``total = match_term - diversity_weight * diversity_term``.
    """
    params = np.asarray(params)
    dtype = _auto_dtype(matrix.n, params.shape[0], matrix.d) if dtype is None else np.dtype(dtype)
    _, best = compute_assignments(matrix, params, config.temperature, config.block_size, dtype)
    match_term = -float(best.mean())
    diversity_term, _ = _pairwise_stats(params, config.temperature, dtype, need_weights=False)
    total = match_term - config.diversity_weight * diversity_term
    return total, match_term, diversity_term


def _owned_feature_sums(matrix: EmbeddingMatrix, owner: np.ndarray, m: int) -> np.ndarray:
    """Sum of feature rows owned by each parameter, accumulated in float64."""
    order = np.argsort(owner, kind="stable")
    sorted_owner = owner[order]
    uniq, starts = np.unique(sorted_owner, return_index=True)
    gathered = matrix.data[order].astype(np.float64)
    segment_sums = np.add.reduceat(gathered, starts, axis=0)
    sums = np.zeros((m, matrix.d), dtype=np.float64)
    sums[uniq] = segment_sums
    return sums


def gradient(matrix: EmbeddingMatrix, params: np.ndarray, config: SelectorConfig,
             assignments, dtype=None) -> np.ndarray:
    """Analytic gradient of the loss with the given assignments held fixed.

    For parameter j:
        -1/(n*tau) * sum_{owner_i = j} f_i
        + w/(m*tau) * ( sum_{k != j} weights[j,k] p_k + sum_{k != j} weights[k,j] p_k )
    returned as float64.
    """
    params = np.asarray(params)
    owner = np.asarray(assignments[0] if isinstance(assignments, tuple) else assignments)
    n, m, d = matrix.n, params.shape[0], matrix.d
    if owner.shape != (n,):
        raise InputError("gradient-assignments", f"expected {n} assignments, got shape {owner.shape}")
    dtype = _auto_dtype(n, m, d) if dtype is None else np.dtype(dtype)
    tau = config.temperature
    grad = _owned_feature_sums(matrix, owner, m)
    grad *= -1.0 / (n * tau)
    weight = config.diversity_weight
    if weight > 0:
        _, pair_w = _pairwise_stats(params, tau, dtype, need_weights=True)
        grad += (weight / (m * tau)) * _repulsion(pair_w, params, dtype)
    return grad


def _repulsion(pair_w: np.ndarray, params: np.ndarray, dtype) -> np.ndarray:
    """(W + W^T) @ params in float64; consumes ``pair_w`` in place."""
    pair_w += np.ascontiguousarray(pair_w.T)
    cast = np.asarray(params, dtype=dtype)
    return np.matmul(pair_w, cast).astype(np.float64)


def step(state: ParamState, grad: np.ndarray, config: SelectorConfig) -> ParamState:
    """One optimizer update followed by re-projection onto the unit sphere."""
    if not np.isfinite(grad).all():
        raise InputError("optimize-nonfinite", f"non-finite gradient at iteration {state.iteration}")
    if config.optimizer == "adam":
        t = state.iteration + 1
        b1, b2 = config.adam_beta1, config.adam_beta2
        state.adam_m *= b1
        state.adam_m += (1 - b1) * grad
        state.adam_v *= b2
        state.adam_v += (1 - b2) * np.square(grad)
        m_hat = state.adam_m / (1 - b1**t)
        v_hat = state.adam_v / (1 - b2**t)
        state.params -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
    else:
        state.params -= config.learning_rate * grad
    norms = np.linalg.norm(state.params, axis=1)
    if not (norms > 0).all():
        raise InputError("optimize-collapse", f"parameter row collapsed to zero at iteration {state.iteration}")
    state.params /= norms[:, None]
    state.iteration += 1
    return state


def optimize(matrix: EmbeddingMatrix, config: SelectorConfig, dtype=None,
             progress: Optional[Callable[[ParamState], None]] = None) -> ParamState:
    """Run the full optimization loop; deterministic given config and input."""
    dtype = _auto_dtype(matrix.n, config.budget, matrix.d) if dtype is None else np.dtype(dtype)
    state = init_params(matrix, config)
    weight = config.diversity_weight
    for it in range(config.iterations):
        owner, best = compute_assignments(matrix, state.params, config.temperature,
                                          config.block_size, dtype)
        diversity_term, pair_w = _pairwise_stats(state.params, config.temperature, dtype,
                                                 need_weights=weight > 0)
        match_term = -float(best.mean())
        total = match_term - weight * diversity_term
        state.loss_history.append(LossRecord(it, total, match_term, diversity_term))

        grad = _owned_feature_sums(matrix, owner, config.budget)
        grad *= -1.0 / (matrix.n * config.temperature)
        if weight > 0:
            grad += (weight / (config.budget * config.temperature)) * _repulsion(pair_w, state.params, dtype)
        step(state, grad, config)
        if progress is not None:
            progress(state)
    return state


def _top_candidates(matrix: EmbeddingMatrix, params: np.ndarray, block_size: int, dtype, keep: int):
    """Per-parameter top-`keep` candidate rows by cosine, ties to smaller row."""
    n, m = matrix.n, params.shape[0]
    params_t = scaled_params(params, 1.0, dtype)
    chunk_buf = np.zeros((_CHUNK, matrix.d), dtype=dtype)
    prod_buf = np.empty((_CHUNK, m), dtype=dtype)
    block = np.empty((min(block_size, n), m), dtype=dtype)
    val_parts, row_parts = [], []
    for lo in range(0, n, block_size):
        hi = min(lo + block_size, n)
        rows = block[: hi - lo]
        sim_chunked(matrix.data, params_t, lo, hi, rows, chunk_buf, prod_buf)
        sims = rows.T  # (m, hi-lo)
        if hi - lo > keep:
            cols = np.argpartition(-sims, keep - 1, axis=1)[:, :keep]
        else:
            cols = np.broadcast_to(np.arange(hi - lo), (m, hi - lo))
        val_parts.append(np.take_along_axis(sims, cols, axis=1).astype(np.float64))
        row_parts.append(cols + lo)
    vals = np.concatenate(val_parts, axis=1)
    rows_idx = np.concatenate(row_parts, axis=1)
    cand_vals = np.empty((m, min(keep, vals.shape[1])), dtype=np.float64)
    cand_rows = np.empty_like(cand_vals, dtype=np.int64)
    for j in range(m):
        order = np.lexsort((rows_idx[j], -vals[j]))[: cand_vals.shape[1]]
        cand_vals[j] = vals[j, order]
        cand_rows[j] = rows_idx[j, order]
    return cand_vals, cand_rows


def match_subset(matrix: EmbeddingMatrix, params: np.ndarray, config: SelectorConfig,
                 dtype=None) -> SelectionResult:
    """Match every parameter to a distinct dataset row.

    Parameters are processed in descending order of their best unconstrained
    cosine similarity; each takes its most similar row not yet taken, ties
    going to the smaller row index. Feasible whenever budget <= n.
    """
    params = np.asarray(params)
    n, m = matrix.n, params.shape[0]
    if m > n:
        raise InputError("config-budget", f"cannot match {m} parameters to {n} rows")
    dtype = _auto_dtype(n, m, matrix.d) if dtype is None else np.dtype(dtype)
    keep = min(n, 32)
    cand_vals, cand_rows = _top_candidates(matrix, params, config.block_size, dtype, keep)
    order = np.lexsort((np.arange(m), -cand_vals[:, 0]))
    taken = np.zeros(n, dtype=bool)
    chosen = np.empty(m, dtype=np.int64)
    achieved = np.empty(m, dtype=np.float64)
    for j in order:
        placed = False
        for v, r in zip(cand_vals[j], cand_rows[j]):
            if not taken[r]:
                chosen[j], achieved[j] = r, v
                taken[r] = True
                placed = True
                break
        if not placed:
            # Every shortlisted row is gone; rescan the remaining rows.
            sims = matrix.data.astype(dtype, copy=False) @ params[j].astype(dtype)
            sims = sims.astype(np.float64)
            sims[taken] = -np.inf
            r = int(np.argmax(sims))
            chosen[j], achieved[j] = r, sims[r]
            taken[r] = True
    np.clip(achieved, -1.0, 1.0, out=achieved)  # rounding can nudge cosines past 1
    return SelectionResult(
        indices=[int(i) for i in chosen],
        match_similarity=[float(v) for v in achieved],
        config=config,
        method="parametric",
    )


def select(matrix: EmbeddingMatrix, config: SelectorConfig, dtype=None,
           progress: Optional[Callable[[ParamState], None]] = None) -> SelectionResult:
    """Optimize parameters, then match them back to rows. End-to-end entry point."""
    start = time.perf_counter()
    state = optimize(matrix, config, dtype=dtype, progress=progress)
    result = match_subset(matrix, state.params, config, dtype=dtype)
    result.loss_history = state.loss_history
    result.wall_time = time.perf_counter() - start
    return result
