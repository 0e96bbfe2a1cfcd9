"""corepick: feature-space subset selection for instruction-tuning corpora.

Core pieces: the EMB1 embedding store and similarity kernel, the parametric
sphere selector, random / k-center / score baselines, subset diagnostics, a
FastAPI service wrapping it all, and a thin CLI client.
"""

from .baselines import ScoreFile, kcenter_select, load_score_file, random_select, score_select
from .diagnostics import coverage, diversity, mean_pass_at_k, pass_at_k
from .embeddings import (
    EmbeddingMatrix,
    InstructionRecord,
    load_records,
    read_emb1_header,
    read_embeddings,
    similarity_block,
    write_embeddings,
)
from .errors import CorepickError, InputError, StorageError
from .selector import (
    LossRecord,
    ParamState,
    SelectionResult,
    SelectorConfig,
    compute_assignments,
    gradient,
    init_params,
    loss,
    match_subset,
    optimize,
    select,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "CorepickError",
    "EmbeddingMatrix",
    "InputError",
    "InstructionRecord",
    "LossRecord",
    "ParamState",
    "ScoreFile",
    "SelectionResult",
    "SelectorConfig",
    "StorageError",
    "compute_assignments",
    "coverage",
    "diversity",
    "gradient",
    "init_params",
    "kcenter_select",
    "load_records",
    "load_score_file",
    "loss",
    "match_subset",
    "mean_pass_at_k",
    "optimize",
    "pass_at_k",
    "random_select",
    "read_emb1_header",
    "read_embeddings",
    "score_select",
    "select",
    "similarity_block",
    "step",
    "write_embeddings",
    "__version__",
]
