"""Feature storage: instruction records, the EMB1 binary matrix format, and
the batched similarity kernel every selector is built on.

EMB1 layout (little-endian): magic ``EMB1`` | u32 format version (1) |
u64 row count n | u32 dimension d | u32 flags (bit0: rows pre-normalized,
bit1: id block present) | n*d float32 row-major payload | optional n*u64 ids.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError, StorageError

EMB1_MAGIC = b"EMB1"
EMB1_VERSION = 1
FLAG_NORMALIZED = 1 << 0
FLAG_HAS_IDS = 1 << 1
_HEADER = struct.Struct("<4sIQII")
HEADER_SIZE = _HEADER.size  # 24 bytes

NORM_TOL = 1e-5

# Similarity products always run inside fixed-size row chunks aligned to
# absolute row offsets (zero-padded at the edges). BLAS picks different
# accumulation orders for different operand shapes, and per-row results must
# not depend on how callers partition [0, n).
_CHUNK = 4096


@dataclass
class InstructionRecord:
    """One instruction/response pair with a stable integer id."""

    id: int
    instruction: str
    response: Optional[str] = None
    source: Optional[str] = None


def load_records(path) -> list[InstructionRecord]:
    """Read instruction records from a JSONL file.

    Every line must be a JSON object with a non-empty ``instruction`` field;
    ``output`` or ``response`` supplies the response text. ``id`` defaults to
    the 0-based line index and explicit ids must be unique. Error messages
    carry 1-based line numbers.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError("records-unreadable", f"cannot read {path}: {exc}")
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise InputError("records-empty", f"{path}: no records")

    records: list[InstructionRecord] = []
    seen_ids: set[int] = set()
    for index, line in enumerate(lines):
        lineno = index + 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError("records-malformed", f"line {lineno}: invalid JSON ({exc.msg})")
        if not isinstance(obj, dict):
            raise InputError("records-malformed", f"line {lineno}: not a JSON object")
        instruction = obj.get("instruction")
        if instruction is None:
            raise InputError("records-missing-field", f"line {lineno}: missing field `instruction`")
        if not isinstance(instruction, str) or not instruction:
            raise InputError("records-missing-field", f"line {lineno}: `instruction` must be non-empty text")
        response = obj.get("response", obj.get("output"))
        if response is not None and not isinstance(response, str):
            raise InputError("records-malformed", f"line {lineno}: response must be text")
        rec_id = obj.get("id", index)
        if not isinstance(rec_id, int) or isinstance(rec_id, bool) or rec_id < 0:
            raise InputError("records-malformed", f"line {lineno}: id must be a non-negative integer")
        if rec_id in seen_ids:
            raise InputError("records-duplicate-id", f"line {lineno}: duplicate id {rec_id}")
        seen_ids.add(rec_id)
        source = obj.get("source")
        if source is not None and not isinstance(source, str):
            raise InputError("records-malformed", f"line {lineno}: source must be text")
        records.append(InstructionRecord(id=rec_id, instruction=instruction, response=response, source=source))
    return records


def _normalize_rows(data: np.ndarray) -> np.ndarray:
    """L2-normalize rows (float64 math), returning float32. Zero rows raise."""
    wide = data.astype(np.float64, copy=False)
    norms = np.linalg.norm(wide, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InputError("matrix-zero-norm", f"zero-norm row {int(zero[0])}")
    return (wide / norms[:, None]).astype(np.float32)


@dataclass
class EmbeddingMatrix:
    """Immutable store of n unit-norm float32 feature rows.

    ``ids`` is None when records are identified by their row position; the
    served ids then default to 0..n-1.
    """

    data: np.ndarray
    ids: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def d(self) -> int:
        return int(self.data.shape[1])

    def row_ids(self) -> np.ndarray:
        if self.ids is not None:
            return self.ids
        return np.arange(self.n, dtype=np.uint64)

    @classmethod
    def from_array(cls, data, ids=None, normalized: bool = False) -> "EmbeddingMatrix":
        """Validate and ingest a float array.

        With ``normalized=False`` rows are L2-normalized here; with
        ``normalized=True`` rows are required to already be unit norm within
        ``NORM_TOL`` and are stored byte-for-byte.
        """
        arr = np.asarray(data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError("matrix-shape", f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            raise InputError("matrix-shape", f"expected float rows, got dtype {arr.dtype}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        bad = ~np.isfinite(arr)
        if bad.any():
            row = int(np.flatnonzero(bad.any(axis=1))[0])
            raise InputError("matrix-nonfinite", f"non-finite value in row {row}")
        if normalized:
            norms = np.linalg.norm(arr.astype(np.float64, copy=False), axis=1)
            off = np.abs(norms - 1.0)
            worst = int(np.argmax(off))
            if off[worst] > NORM_TOL:
                raise InputError(
                    "matrix-not-normalized",
                    f"row {worst} has norm {norms[worst]:.6f}, expected 1 within {NORM_TOL}",
                )
        else:
            arr = _normalize_rows(arr)
        id_arr = None
        if ids is not None:
            id_arr = np.ascontiguousarray(np.asarray(ids, dtype=np.uint64))
            if id_arr.shape != (arr.shape[0],):
                raise InputError("matrix-ids", f"expected {arr.shape[0]} ids, got {id_arr.shape}")
            if np.unique(id_arr).size != id_arr.size:
                raise InputError("matrix-duplicate-ids", "ids are not unique")
        return cls(data=arr, ids=id_arr)


def read_emb1_header(path) -> dict:
    """Parse and sanity-check an EMB1 header without loading the payload."""
    path = Path(path)
    try:
        size = path.stat().st_size
        with open(path, "rb") as fh:
            head = fh.read(HEADER_SIZE)
    except OSError as exc:
        raise StorageError("emb1-unreadable", f"cannot read {path}: {exc}")
    if len(head) < HEADER_SIZE:
        raise InputError("emb1-truncated", f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    magic, version, n, d, flags = _HEADER.unpack(head)
    if magic != EMB1_MAGIC:
        raise InputError("emb1-bad-magic", f"{path}: bad magic {magic!r}, expected {EMB1_MAGIC!r}")
    if version != EMB1_VERSION:
        raise InputError("emb1-version", f"{path}: unsupported format version {version}")
    if n < 1 or d < 1:
        raise InputError("emb1-header", f"{path}: header requires n >= 1 and d >= 1, got n={n} d={d}")
    if d != 0 and n > (2**63 - 1) // (4 * d):
        raise InputError("emb1-overflow", f"{path}: n*d overflows a sane payload size (n={n}, d={d})")
    expected = HEADER_SIZE + 4 * n * d + (8 * n if flags & FLAG_HAS_IDS else 0)
    if size != expected:
        raise InputError("emb1-truncated", f"{path}: expected {expected} bytes, found {size}")
    return {
        "n": int(n),
        "d": int(d),
        "normalized": bool(flags & FLAG_NORMALIZED),
        "has_ids": bool(flags & FLAG_HAS_IDS),
        "size_bytes": int(size),
    }


def read_embeddings(path) -> EmbeddingMatrix:
    """Load an EMB1 file.

    Rows flagged as pre-normalized are verified (within ``NORM_TOL``) and kept
    bit-exact; otherwise rows are L2-normalized on load and zero-norm rows are
    an error.
    """
    info = read_emb1_header(path)
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise StorageError("emb1-unreadable", f"cannot read {path}: {exc}")
    n, d = info["n"], info["d"]
    payload_end = HEADER_SIZE + 4 * n * d
    data = np.frombuffer(blob, dtype="<f4", count=n * d, offset=HEADER_SIZE).reshape(n, d)
    ids = None
    if info["has_ids"]:
        ids = np.frombuffer(blob, dtype="<u8", count=n, offset=payload_end)
    bad = ~np.isfinite(data)
    if bad.any():
        row = int(np.flatnonzero(bad.any(axis=1))[0])
        raise InputError("emb1-nonfinite", f"{path}: non-finite value in row {row}")
    if ids is not None and np.unique(ids).size != ids.size:
        raise InputError("emb1-duplicate-ids", f"{path}: id block is not unique")
    return EmbeddingMatrix.from_array(data, ids=ids, normalized=info["normalized"])


def write_embeddings(matrix: EmbeddingMatrix, path) -> None:
    """Serialize a matrix to EMB1. Re-reading reproduces the matrix bit-exactly."""
    path = Path(path)
    flags = FLAG_NORMALIZED
    if matrix.ids is not None:
        flags |= FLAG_HAS_IDS
    header = _HEADER.pack(EMB1_MAGIC, EMB1_VERSION, matrix.n, matrix.d, flags)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())
            if matrix.ids is not None:
                fh.write(np.ascontiguousarray(matrix.ids, dtype="<u8").tobytes())
    except OSError as exc:
        raise StorageError("emb1-unwritable", f"cannot write {path}: {exc}")


def scaled_params(params: np.ndarray, tau: float, dtype) -> np.ndarray:
    """Pre-divide parameters by tau and lay them out (d, m) for the kernel."""
    wide = np.asarray(params, dtype=np.float64)
    return np.ascontiguousarray((wide / float(tau)).T, dtype=dtype)


def sim_chunked(data: np.ndarray, params_t: np.ndarray, lo: int, hi: int, out: np.ndarray,
                chunk_buf: np.ndarray, prod_buf: np.ndarray) -> None:
    """Fill ``out[0:hi-lo]`` with rows lo..hi of ``data @ params_t``.

    Work is done chunk-by-chunk at absolute ``_CHUNK`` alignment so the result
    for any row is bitwise independent of the requested range.
    """
    n = data.shape[0]
    pos = lo
    while pos < hi:
        base = (pos // _CHUNK) * _CHUNK
        stop = min(base + _CHUNK, hi)
        avail = min(base + _CHUNK, n)
        if pos == base and stop == avail == base + _CHUNK and data.dtype == out.dtype:
            # Full aligned chunk at native dtype: multiply straight into the
            # output. Same operand shape and values as the staged path below,
            # hence bitwise-identical results.
            np.matmul(data[base:stop], params_t, out=out[pos - lo: stop - lo])
        else:
            chunk_buf[: avail - base] = data[base:avail]
            if avail - base < _CHUNK:
                chunk_buf[avail - base:] = 0.0
            np.matmul(chunk_buf, params_t, out=prod_buf)
            out[pos - lo: stop - lo] = prod_buf[pos - base: stop - base]
        pos = stop


def similarity_block(matrix: EmbeddingMatrix, params: np.ndarray, row_range, tau: float,
                     dtype=np.float32) -> np.ndarray:
    """Scaled similarities between a row range of the store and a parameter set.

    Entry (i, j) equals dot(f_{lo+i}, params_j) / tau. Results are computed per
    row, so any partition of [0, n) into ranges concatenates to the exact
    single-call output.
    """
    lo, hi = int(row_range[0]), int(row_range[1])
    if not (0 <= lo < hi <= matrix.n):
        raise InputError("similarity-range", f"invalid row range [{lo}, {hi}) for n={matrix.n}")
    params = np.asarray(params)
    if params.ndim != 2 or params.shape[1] != matrix.d:
        raise InputError("similarity-dim", f"parameter shape {params.shape} does not match d={matrix.d}")
    if not tau > 0:
        raise InputError("similarity-tau", f"tau must be positive, got {tau}")
    dtype = np.dtype(dtype)
    params_t = scaled_params(params, tau, dtype)
    m = params.shape[0]
    out = np.empty((hi - lo, m), dtype=dtype)
    chunk_buf = np.zeros((_CHUNK, matrix.d), dtype=dtype)
    prod_buf = np.empty((_CHUNK, m), dtype=dtype)
    sim_chunked(matrix.data, params_t, lo, hi, out, chunk_buf, prod_buf)
    return out
