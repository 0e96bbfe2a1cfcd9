"""FastAPI service exposing the selection pipeline over JSON.

All file arguments are paths on the host running the service; the CLI runs
this app in-process by default, so they are ordinary local paths there.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..baselines import kcenter_select, load_score_file, random_select, score_select
from ..diagnostics import coverage, diversity, mean_pass_at_k
from ..embeddings import EmbeddingMatrix, load_records, read_emb1_header, read_embeddings, write_embeddings
from ..errors import CorepickError, InputError, StorageError
from ..runtime import set_blas_threads
from ..selector import SelectionResult, SelectorConfig, select
from . import models


def _error_body(code: str, message: str, kind: str) -> dict:
    return {"error": {"code": code, "message": message, "kind": kind}}


def _selector_config(req: models.SelectRequest) -> SelectorConfig:
    defaults = SelectorConfig(budget=req.budget)
    return SelectorConfig(
        budget=req.budget,
        temperature=defaults.temperature if req.tau is None else req.tau,
        diversity_weight=defaults.diversity_weight if req.lambda_ is None else req.lambda_,
        learning_rate=defaults.learning_rate if req.lr is None else req.lr,
        iterations=defaults.iterations if req.iters is None else req.iters,
        seed=req.seed,
        block_size=defaults.block_size if req.block_size is None else req.block_size,
    )


def _materialize_subset(records_path: str, indices: list[int], out_path: str) -> None:
    records = load_records(records_path)
    for idx in indices:
        if idx >= len(records):
            raise InputError("subset-index", f"selected index {idx} outside the {len(records)} records")
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            for idx in indices:
                rec = records[idx]
                payload = {"id": rec.id, "instruction": rec.instruction}
                if rec.response is not None:
                    payload["response"] = rec.response
                if rec.source is not None:
                    payload["source"] = rec.source
                fh.write(json.dumps(payload, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise StorageError("subset-unwritable", f"cannot write {out_path}: {exc}")


def create_app() -> FastAPI:
    app = FastAPI(title="corepick", version=__version__)

    @app.exception_handler(CorepickError)
    async def _domain_error(_, exc: CorepickError):
        status = 400 if exc.kind == "validation" else 500
        return JSONResponse(status_code=status, content=_error_body(exc.code, exc.message, exc.kind))

    @app.exception_handler(RequestValidationError)
    async def _schema_error(_, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(p) for p in first.get("loc", ()) if p != "body")
        message = f"{where}: {first.get('msg', 'invalid request')}" if where else first.get("msg", "invalid request")
        return JSONResponse(status_code=422, content=_error_body("request-invalid", message, "validation"))

    @app.get("/health", response_model=models.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/select", response_model=models.SelectionDocument)
    def run_select(req: models.SelectRequest):
        if req.threads:
            set_blas_threads(req.threads)
        matrix = read_embeddings(req.embeddings)
        config = _selector_config(req)
        started = time.perf_counter()
        if req.method == "parametric":
            result = select(matrix, config)
        elif req.method == "random":
            result = random_select(matrix.n, req.budget, req.seed)
        elif req.method == "kcenter":
            result = kcenter_select(matrix, req.budget, req.seed)
        else:
            scores = load_score_file(req.scores, n=matrix.n, direction=req.direction)
            result = score_select(scores, req.budget)
        if result.wall_time == 0.0:
            result.wall_time = time.perf_counter() - started
        if req.subset_out:
            _materialize_subset(req.records, result.indices, req.subset_out)
        return result.to_json_dict()

    @app.post("/v1/diagnose", response_model=models.DiagnoseResponse)
    def run_diagnose(req: models.DiagnoseRequest):
        matrix = read_embeddings(req.embeddings)
        if req.selection is not None:
            try:
                doc = json.loads(Path(req.selection).read_text(encoding="utf-8"))
            except OSError as exc:
                raise StorageError("selection-unreadable", f"cannot read {req.selection}: {exc}")
            except json.JSONDecodeError as exc:
                raise InputError("selection-malformed", f"{req.selection}: invalid JSON ({exc.msg})")
            try:
                indices = SelectionResult.from_json_dict(doc).indices
            except (KeyError, TypeError, ValueError):
                raise InputError("selection-malformed", f"{req.selection}: missing or invalid `indices`")
        else:
            indices = req.indices
        return {
            "coverage": coverage(matrix, indices),
            "diversity": diversity(matrix, indices),
            "m": len(indices),
            "n": matrix.n,
        }

    @app.post("/v1/passk", response_model=models.PasskResponse)
    def run_passk(req: models.PasskRequest):
        if req.items is not None:
            counts = [(item.n, item.c) for item in req.items]
        else:
            counts = [(req.n, req.c)]
        values, mean = mean_pass_at_k(counts, req.k)
        results = [{"n": n, "c": c, "pass_at_k": v} for (n, c), v in zip(counts, values)]
        return {"k": req.k, "results": results, "mean": mean}

    @app.post("/v1/embeddings/inspect", response_model=models.InspectResponse)
    def run_inspect(req: models.InspectRequest):
        return read_emb1_header(req.path)

    @app.post("/v1/embeddings/convert", response_model=models.ConvertResponse)
    def run_convert(req: models.ConvertRequest):
        try:
            raw = np.load(req.input, allow_pickle=False)
        except OSError as exc:
            raise StorageError("convert-unreadable", f"cannot read {req.input}: {exc}")
        except ValueError as exc:
            raise InputError("convert-malformed", f"{req.input}: {exc}")
        matrix = EmbeddingMatrix.from_array(raw)
        write_embeddings(matrix, req.output)
        return {"n": matrix.n, "d": matrix.d, "output": req.output}

    return app
