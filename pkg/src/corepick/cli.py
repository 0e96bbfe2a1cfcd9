"""Thin command-line client for the selection service.

Every command talks to the FastAPI app: in-process by default, or to a
running server via ``--server``. Exit codes: 0 success, 1 validation
failure, 2 I/O failure. Errors print one line ``error: <code>: <message>``
to standard error.
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path

import click

_ENV_THREAD_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")
_CONFIG_KEYS = ("method", "budget", "tau", "lambda", "lr", "iters", "seed",
                "block_size", "scores", "direction", "threads")

_app = None


def _err(code: str, message: str) -> None:
    click.echo(f"error: {code}: {message}", err=True)


def _fail(code: str, message: str, exit_code: int):
    _err(code, message)
    sys.exit(exit_code)


def _pre_import_threads(threads) -> None:
    # Must happen before numpy is first imported for the env cap to stick.
    if threads:
        for var in _ENV_THREAD_VARS:
            os.environ[var] = str(int(threads))


def _local_app():
    global _app
    if _app is None:
        from corepick.service import create_app

        _app = create_app()
    return _app


def _post(server: str | None, path: str, payload: dict):
    import httpx

    if server:
        try:
            with httpx.Client(base_url=server, timeout=None) as client:
                resp = client.post(path, json=payload)
        except httpx.HTTPError as exc:
            _fail("server-unreachable", f"{server}: {exc}", 2)
    else:
        app = _local_app()

        async def go():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(transport=transport, base_url="http://corepick.local",
                                         timeout=None) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(go())
    try:
        body = resp.json()
    except ValueError:
        _fail("server-error", f"non-JSON response (HTTP {resp.status_code})", 2)
    if resp.status_code >= 400:
        err = body.get("error") if isinstance(body, dict) else None
        if not isinstance(err, dict):
            _fail("server-error", f"HTTP {resp.status_code}", 2)
        exit_code = 1 if err.get("kind") == "validation" else 2
        _fail(err.get("code", "server-error"), err.get("message", "request failed"), exit_code)
    return body


def _parse_toml_value(text: str, where: str):
    text = text.strip()
    if text.startswith('"') or text.startswith("'"):
        quote = text[0]
        end = text.find(quote, 1)
        if end < 0:
            raise click.UsageError(f"{where}: unterminated string")
        return text[1:end]
    text = text.split("#", 1)[0].strip()
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise click.UsageError(f"{where}: cannot parse value {text!r}")


def _read_flat_toml(path: str) -> dict:
    """Read the flat ``key = value`` TOML subset used for config files.

    Supports strings, integers, floats, booleans, comments, and table
    headers (which are ignored; all keys are treated as one flat table).
    """
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        _fail("config-unreadable", f"cannot read {path}: {exc}", 2)
    values: dict = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or (line.startswith("[") and line.endswith("]")):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise click.UsageError(f"{path} line {lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise click.UsageError(f"{path} line {lineno}: unknown key {key!r}")
        values[key] = _parse_toml_value(val, f"{path} line {lineno}")
    return values


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@click.group()
def cli():
    """Subset selection over embedding matrices: selectors, diagnostics, pass@k."""


@cli.command("select")
@click.option("--embeddings", required=True, help="EMB1 feature matrix.")
@click.option("--method", type=click.Choice(["parametric", "random", "kcenter", "score"]), default=None)
@click.option("--budget", type=int, default=None, help="Number of rows to select.")
@click.option("--out", "out_path", required=True, help="Where to write the selection JSON.")
@click.option("--tau", type=float, default=None, help="Similarity temperature.")
@click.option("--lambda", "lambda_", type=float, default=None, help="Diversity weight.")
@click.option("--lr", type=float, default=None, help="Learning rate.")
@click.option("--iters", type=int, default=None, help="Optimization iterations.")
@click.option("--seed", type=int, default=None, show_default="0")
@click.option("--block-size", type=int, default=None, help="Rows per similarity batch.")
@click.option("--scores", default=None, help="Score file for --method score.")
@click.option("--direction", type=click.Choice(["descending", "ascending"]), default=None)
@click.option("--records", default=None, help="Records JSONL for --subset-out.")
@click.option("--subset-out", default=None, help="Materialize selected records to this JSONL.")
@click.option("--config", "config_path", default=None, help="Flat TOML with defaults for the knobs above.")
@click.option("--threads", type=int, default=None, help="Cap BLAS threads.")
@click.option("--no-timing", is_flag=True, help="Zero wall_time_s for byte-reproducible output.")
@click.option("--server", default=None, help="Base URL of a running service (default: in-process).")
def cmd_select(embeddings, method, budget, out_path, tau, lambda_, lr, iters, seed,
               block_size, scores, direction, records, subset_out, config_path,
               threads, no_timing, server):
    """Run a selector and write its SelectionResult JSON."""
    file_cfg = _read_flat_toml(config_path) if config_path else {}
    flags = {
        "method": method, "budget": budget, "tau": tau, "lambda": lambda_,
        "lr": lr, "iters": iters, "seed": seed, "block_size": block_size,
        "scores": scores, "direction": direction, "threads": threads,
    }
    merged = {key: (flags[key] if flags[key] is not None else file_cfg.get(key)) for key in flags}
    if merged["method"] is None:
        raise click.UsageError("--method is required (flag or config file)")
    if merged["budget"] is None:
        raise click.UsageError("--budget is required (flag or config file)")
    if merged["seed"] is None:
        merged["seed"] = 0
    if merged["direction"] is None:
        merged["direction"] = "descending"
    _pre_import_threads(merged["threads"])
    payload = {"embeddings": embeddings, "records": records, "subset_out": subset_out}
    payload.update(merged)
    payload = {key: value for key, value in payload.items() if value is not None}
    doc = _post(server, "/v1/select", payload)
    if no_timing:
        doc["wall_time_s"] = 0.0
    try:
        Path(out_path).write_text(_dump_json(doc), encoding="utf-8")
    except OSError as exc:
        _fail("out-unwritable", f"cannot write {out_path}: {exc}", 2)
    click.echo(f"selected {len(doc['indices'])} rows ({doc['method']}) -> {out_path}", err=True)


@cli.command("diagnose")
@click.option("--embeddings", required=True, help="EMB1 feature matrix.")
@click.option("--selection", required=True, help="Selection JSON produced by `select`.")
@click.option("--server", default=None)
def cmd_diagnose(embeddings, selection, server):
    """Print coverage and diversity statistics for a selection."""
    doc = _post(server, "/v1/diagnose", {"embeddings": embeddings, "selection": selection})
    click.echo(_dump_json(doc), nl=False)


@cli.command("passk")
@click.option("--n", "n_total", type=int, default=None, help="Generated samples per problem.")
@click.option("--c", "n_correct", type=int, default=None, help="Correct samples.")
@click.option("--k", type=int, required=True)
@click.option("--file", "file_path", default=None, help="JSONL of per-problem {n, c}.")
@click.option("--server", default=None)
def cmd_passk(n_total, n_correct, k, file_path, server):
    """Estimate pass@k for one problem or a JSONL of problems."""
    if (file_path is None) == (n_total is None and n_correct is None):
        raise click.UsageError("provide --n/--c or --file, not both")
    if file_path is not None:
        items = []
        try:
            lines = Path(file_path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            _fail("passk-unreadable", f"cannot read {file_path}: {exc}", 2)
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                items.append({"n": int(obj["n"]), "c": int(obj["c"])})
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise click.UsageError(f"{file_path} line {lineno}: expected {{n, c}}")
        payload = {"k": k, "items": items}
    else:
        if n_total is None or n_correct is None:
            raise click.UsageError("--n and --c must be given together")
        payload = {"k": k, "n": n_total, "c": n_correct}
    doc = _post(server, "/v1/passk", payload)
    click.echo(_dump_json(doc), nl=False)


@cli.command("inspect")
@click.option("--embeddings", required=True, help="EMB1 file to describe.")
@click.option("--server", default=None)
def cmd_inspect(embeddings, server):
    """Print the parsed EMB1 header."""
    doc = _post(server, "/v1/embeddings/inspect", {"path": embeddings})
    click.echo(_dump_json(doc), nl=False)


@cli.command("convert")
@click.option("--in", "input_path", required=True, help=".npy 2-D float array to ingest.")
@click.option("--out", "output_path", required=True, help="EMB1 file to write.")
@click.option("--server", default=None)
def cmd_convert(input_path, output_path, server):
    """Normalize a .npy matrix and write it as EMB1."""
    doc = _post(server, "/v1/embeddings/convert", {"input": input_path, "output": output_path})
    click.echo(_dump_json(doc), nl=False)


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--threads", type=int, default=None, help="Cap BLAS threads.")
def cmd_serve(host, port, threads):
    """Run the selection service under uvicorn."""
    _pre_import_threads(threads)
    import uvicorn

    from corepick.runtime import set_blas_threads
    from corepick.service import create_app

    if threads:
        set_blas_threads(threads)
    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        _err("usage", exc.format_message())
        sys.exit(1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
