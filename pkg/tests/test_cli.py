import json
import socket
import subprocess
import sys
import time

import numpy as np
import pytest

from corepick import write_embeddings
from corepick.cli import main

from conftest import sphere_mixture


@pytest.fixture
def emb_path(tmp_path):
    mat, _ = sphere_mixture(120, 8, [0.5, 0.5], seed=3)
    path = tmp_path / "feats.emb1"
    write_embeddings(mat, path)
    return str(path)


def run_cli(args):
    try:
        main(list(args))
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


class TestSelectCommand:
    def test_writes_selection_json(self, emb_path, tmp_path):
        out = tmp_path / "sel.json"
        code = run_cli(["select", "--embeddings", emb_path, "--method", "random",
                        "--budget", "5", "--seed", "4", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["method"] == "random"
        assert len(doc["indices"]) == 5

    def test_no_timing_output_byte_identical(self, emb_path, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["select", "--embeddings", emb_path, "--method", "parametric", "--budget", "6",
                "--iters", "8", "--seed", "1", "--no-timing"]
        assert run_cli(args + ["--out", str(a)]) == 0
        assert run_cli(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_budget_zero_exits_one(self, emb_path, tmp_path, capsys):
        code = run_cli(["select", "--embeddings", emb_path, "--method", "random",
                        "--budget", "0", "--out", str(tmp_path / "x.json")])
        assert code == 1
        assert capsys.readouterr().err.startswith("error: config-budget:")

    def test_score_without_scores_exits_one(self, emb_path, tmp_path, capsys):
        code = run_cli(["select", "--embeddings", emb_path, "--method", "score",
                        "--budget", "3", "--out", str(tmp_path / "x.json")])
        assert code == 1
        assert "error: " in capsys.readouterr().err

    def test_missing_embeddings_exits_two(self, tmp_path):
        code = run_cli(["select", "--embeddings", str(tmp_path / "nope.emb1"), "--method", "random",
                        "--budget", "3", "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_config_file_supplies_defaults_flags_win(self, emb_path, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('[select]\nmethod = "random"\nbudget = 4\nseed = 11\n', encoding="utf-8")
        out = tmp_path / "sel.json"
        code = run_cli(["select", "--embeddings", emb_path, "--config", str(cfg),
                        "--budget", "7", "--out", str(out), "--no-timing"])
        assert code == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["method"] == "random"      # from config
        assert len(doc["indices"]) == 7       # flag overrides config
        assert doc["config"]["seed"] == 11    # from config

    def test_subset_out(self, emb_path, tmp_path):
        records = tmp_path / "recs.jsonl"
        records.write_text(
            "".join(json.dumps({"instruction": f"t{i}"}) + "\n" for i in range(120)), encoding="utf-8")
        out = tmp_path / "sel.json"
        subset = tmp_path / "subset.jsonl"
        code = run_cli(["select", "--embeddings", emb_path, "--method", "kcenter", "--budget", "4",
                        "--out", str(out), "--records", str(records), "--subset-out", str(subset)])
        assert code == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        ids = [json.loads(ln)["id"] for ln in subset.read_text(encoding="utf-8").splitlines()]
        assert ids == doc["indices"]

    def test_paper_default_configuration(self, emb_path, tmp_path):
        out = tmp_path / "sel.json"
        code = run_cli(["select", "--embeddings", emb_path, "--method", "parametric", "--budget", "5",
                        "--iters", "3", "--out", str(out)])
        assert code == 0
        cfg = json.loads(out.read_text(encoding="utf-8"))["config"]
        assert cfg["tau"] == 0.07 and cfg["lr"] == 0.001 and cfg["lambda"] == 1.0 and cfg["seed"] == 0


class TestDiagnoseCommand:
    def test_full_selection(self, emb_path, tmp_path, capsys):
        sel = tmp_path / "sel.json"
        sel.write_text(json.dumps({"method": "random", "indices": list(range(120))}), encoding="utf-8")
        code = run_cli(["diagnose", "--embeddings", emb_path, "--selection", str(sel)])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["coverage"] == pytest.approx(1.0, abs=1e-5)
        assert doc["m"] == 120 and doc["n"] == 120

    def test_index_out_of_range_exits_one(self, emb_path, tmp_path, capsys):
        sel = tmp_path / "sel.json"
        sel.write_text(json.dumps({"method": "random", "indices": [0, 300]}), encoding="utf-8")
        code = run_cli(["diagnose", "--embeddings", emb_path, "--selection", str(sel)])
        assert code == 1
        assert "error: diagnose-index:" in capsys.readouterr().err


class TestPasskCommand:
    def test_single_problem(self, capsys):
        code = run_cli(["passk", "--n", "10", "--c", "3", "--k", "1"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mean"] == pytest.approx(0.3, abs=1e-12)

    def test_file_of_problems(self, tmp_path, capsys):
        path = tmp_path / "p.jsonl"
        path.write_text('{"n": 1, "c": 1}\n{"n": 1, "c": 0}\n', encoding="utf-8")
        code = run_cli(["passk", "--file", str(path), "--k", "1"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mean"] == pytest.approx(0.5)
        assert [r["pass_at_k"] for r in doc["results"]] == [1.0, 0.0]

    def test_c_above_n_exits_one(self, capsys):
        code = run_cli(["passk", "--n", "5", "--c", "6", "--k", "1"])
        assert code == 1
        assert "error: " in capsys.readouterr().err

    def test_all_correct(self, capsys):
        code = run_cli(["passk", "--n", "5", "--c", "5", "--k", "5"])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["mean"] == 1.0


class TestInspectAndConvert:
    def test_roundtrip(self, tmp_path, capsys):
        src = tmp_path / "m.npy"
        rng = np.random.default_rng(0)
        np.save(src, rng.standard_normal((9, 4)).astype(np.float32))
        emb = tmp_path / "m.emb1"
        assert run_cli(["convert", "--in", str(src), "--out", str(emb)]) == 0
        capsys.readouterr()
        assert run_cli(["inspect", "--embeddings", str(emb)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert (doc["n"], doc["d"], doc["normalized"]) == (9, 4, True)

    def test_inspect_missing_exits_two(self, tmp_path, capsys):
        assert run_cli(["inspect", "--embeddings", str(tmp_path / "no.emb1")]) == 2
        assert "error: emb1-unreadable:" in capsys.readouterr().err


class TestRemoteServer:
    def test_cli_against_running_service(self, emb_path, tmp_path, capsys):
        with socket.socket() as sock:
            sock.bind(("127.0.0.1", 0))
            port = sock.getsockname()[1]
        proc = subprocess.Popen(
            [sys.executable, "-m", "corepick.cli", "serve", "--host", "127.0.0.1", "--port", str(port)],
            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
        )
        url = f"http://127.0.0.1:{port}"
        try:
            import httpx

            for _ in range(100):
                try:
                    if httpx.get(f"{url}/health", timeout=1.0).status_code == 200:
                        break
                except httpx.HTTPError:
                    time.sleep(0.2)
            else:
                pytest.fail("service did not come up")
            code = run_cli(["passk", "--n", "10", "--c", "3", "--k", "1", "--server", url])
            assert code == 0
            assert json.loads(capsys.readouterr().out)["mean"] == pytest.approx(0.3, abs=1e-12)
            out = tmp_path / "sel.json"
            code = run_cli(["select", "--embeddings", emb_path, "--method", "random", "--budget", "4",
                            "--out", str(out), "--server", url])
            assert code == 0
            assert len(json.loads(out.read_text(encoding="utf-8"))["indices"]) == 4
        finally:
            proc.terminate()
            proc.wait(timeout=10)

    def test_unreachable_server_exits_two(self, capsys):
        code = run_cli(["passk", "--n", "1", "--c", "1", "--k", "1",
                        "--server", "http://127.0.0.1:9"])
        assert code == 2
        assert "error: server-unreachable:" in capsys.readouterr().err


class TestUsageErrors:
    def test_missing_required_flag_exits_one(self, capsys):
        code = run_cli(["select", "--method", "random"])
        assert code == 1
        assert capsys.readouterr().err.startswith("error: usage:")

    def test_unknown_config_key_exits_one(self, emb_path, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text("bogus = 1\n", encoding="utf-8")
        code = run_cli(["select", "--embeddings", emb_path, "--config", str(cfg),
                        "--method", "random", "--budget", "2", "--out", str(tmp_path / "x.json")])
        assert code == 1
        assert "unknown key" in capsys.readouterr().err
