"""Pydantic request/response schemas for the selection service."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ConfigEcho(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    m: int
    tau: float
    lambda_: float = Field(alias="lambda")
    lr: float
    T: int
    seed: int


class LossEntry(BaseModel):
    iter: int
    L: float
    M: float
    R: float


class SelectionDocument(BaseModel):
    """Wire form of a selection result; indices refer to EMB1 row order."""

    model_config = ConfigDict(populate_by_name=True)

    method: str
    config: ConfigEcho
    indices: List[int]
    match_similarity: List[float]
    loss_history: List[LossEntry]
    wall_time_s: float


class SelectRequest(BaseModel):
    """Run one selector against a server-local EMB1 file."""

    embeddings: str
    method: Literal["parametric", "random", "kcenter", "score"]
    budget: int
    tau: Optional[float] = None
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    lr: Optional[float] = None
    iters: Optional[int] = None
    seed: int = 0
    block_size: Optional[int] = None
    scores: Optional[str] = None
    direction: Literal["descending", "ascending"] = "descending"
    records: Optional[str] = None
    subset_out: Optional[str] = None
    threads: Optional[int] = None

    model_config = ConfigDict(populate_by_name=True)

    @model_validator(mode="after")
    def _check_flags(self):
        if self.method == "score" and not self.scores:
            raise ValueError("method `score` requires a scores file")
        if self.subset_out and not self.records:
            raise ValueError("subset_out requires the records file")
        return self


class DiagnoseRequest(BaseModel):
    embeddings: str
    selection: Optional[str] = None
    indices: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_source(self):
        if (self.selection is None) == (self.indices is None):
            raise ValueError("provide exactly one of `selection` or `indices`")
        return self


class DiversityStats(BaseModel):
    mean_pairwise_sim: float
    max_pairwise_sim: float
    min_pairwise_dist: float


class DiagnoseResponse(BaseModel):
    coverage: float
    diversity: DiversityStats
    m: int
    n: int


class PasskItem(BaseModel):
    n: int
    c: int


class PasskRequest(BaseModel):
    k: int
    n: Optional[int] = None
    c: Optional[int] = None
    items: Optional[List[PasskItem]] = None

    @model_validator(mode="after")
    def _check_form(self):
        single = self.n is not None and self.c is not None
        if single == (self.items is not None):
            raise ValueError("provide either n and c, or a list of items")
        return self


class PasskResult(BaseModel):
    n: int
    c: int
    pass_at_k: float


class PasskResponse(BaseModel):
    k: int
    results: List[PasskResult]
    mean: float


class InspectRequest(BaseModel):
    path: str


class InspectResponse(BaseModel):
    n: int
    d: int
    normalized: bool
    has_ids: bool
    size_bytes: int


class ConvertRequest(BaseModel):
    input: str
    output: str


class ConvertResponse(BaseModel):
    n: int
    d: int
    output: str


class HealthResponse(BaseModel):
    status: str
    version: str
