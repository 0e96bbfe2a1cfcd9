import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from corepick import EmbeddingMatrix, write_embeddings
from corepick.service import create_app

from conftest import sphere_mixture, unit_rows


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


@pytest.fixture
def emb_path(tmp_path):
    mat, _ = sphere_mixture(150, 10, [0.6, 0.4], seed=0)
    path = tmp_path / "feats.emb1"
    write_embeddings(mat, path)
    return str(path)


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


class TestSelectEndpoint:
    def test_parametric(self, client, emb_path):
        resp = client.post("/v1/select", json={
            "embeddings": emb_path, "method": "parametric", "budget": 8, "iters": 10, "seed": 1,
        })
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["method"] == "parametric"
        assert len(set(doc["indices"])) == 8
        assert len(doc["loss_history"]) == 10
        assert doc["config"] == {"m": 8, "tau": 0.07, "lambda": 1.0, "lr": 0.001, "T": 10, "seed": 1}
        assert doc["wall_time_s"] > 0

    def test_random_and_kcenter_and_score(self, client, emb_path, tmp_path):
        for method, extra in (("random", {}), ("kcenter", {})):
            resp = client.post("/v1/select", json={
                "embeddings": emb_path, "method": method, "budget": 5, **extra})
            assert resp.status_code == 200, resp.text
            assert len(set(resp.json()["indices"])) == 5
        scores = tmp_path / "scores.txt"
        scores.write_text("".join(f"{v}\n" for v in np.linspace(1, 0, 150)), encoding="utf-8")
        resp = client.post("/v1/select", json={
            "embeddings": emb_path, "method": "score", "budget": 3, "scores": str(scores)})
        assert resp.status_code == 200
        assert resp.json()["indices"] == [0, 1, 2]

    def test_score_requires_scores(self, client, emb_path):
        resp = client.post("/v1/select", json={"embeddings": emb_path, "method": "score", "budget": 3})
        assert resp.status_code == 422
        body = resp.json()
        assert body["error"]["kind"] == "validation"

    def test_budget_zero_rejected(self, client, emb_path):
        resp = client.post("/v1/select", json={"embeddings": emb_path, "method": "random", "budget": 0})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "config-budget"

    def test_missing_embeddings_is_io(self, client):
        resp = client.post("/v1/select", json={"embeddings": "/no/such.emb1", "method": "random", "budget": 1})
        assert resp.status_code == 500
        assert resp.json()["error"]["kind"] == "io"

    def test_subset_materialization(self, client, emb_path, tmp_path):
        records = tmp_path / "recs.jsonl"
        records.write_text(
            "".join(json.dumps({"instruction": f"task {i}", "output": f"code {i}"}) + "\n" for i in range(150)),
            encoding="utf-8",
        )
        subset = tmp_path / "subset.jsonl"
        resp = client.post("/v1/select", json={
            "embeddings": emb_path, "method": "random", "budget": 4, "seed": 2,
            "records": str(records), "subset_out": str(subset),
        })
        assert resp.status_code == 200
        picked = resp.json()["indices"]
        lines = [json.loads(ln) for ln in subset.read_text(encoding="utf-8").splitlines()]
        assert [rec["id"] for rec in lines] == picked


class TestDiagnoseEndpoint:
    def test_full_selection_coverage_one(self, client, emb_path):
        resp = client.post("/v1/diagnose", json={"embeddings": emb_path, "indices": list(range(150))})
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["coverage"] == pytest.approx(1.0, abs=1e-5)
        assert doc["m"] == 150 and doc["n"] == 150

    def test_selection_file_roundtrip(self, client, emb_path, tmp_path):
        resp = client.post("/v1/select", json={"embeddings": emb_path, "method": "random", "budget": 6})
        sel = tmp_path / "sel.json"
        sel.write_text(json.dumps(resp.json()), encoding="utf-8")
        resp2 = client.post("/v1/diagnose", json={"embeddings": emb_path, "selection": str(sel)})
        assert resp2.status_code == 200
        assert resp2.json()["m"] == 6

    def test_out_of_range_index(self, client, emb_path):
        resp = client.post("/v1/diagnose", json={"embeddings": emb_path, "indices": [0, 4, 150]})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "diagnose-index"


class TestPasskEndpoint:
    def test_single_problem(self, client):
        resp = client.post("/v1/passk", json={"n": 10, "c": 3, "k": 1})
        assert resp.status_code == 200
        assert resp.json()["mean"] == pytest.approx(0.3, abs=1e-12)

    def test_items_mean(self, client):
        resp = client.post("/v1/passk", json={"k": 1, "items": [{"n": 1, "c": 1}, {"n": 1, "c": 0}]})
        assert resp.json()["mean"] == pytest.approx(0.5)

    def test_c_above_n_rejected(self, client):
        resp = client.post("/v1/passk", json={"n": 5, "c": 6, "k": 1})
        assert resp.status_code == 400
        assert resp.json()["error"]["kind"] == "validation"


class TestEmbeddingEndpoints:
    def test_inspect(self, client, emb_path):
        resp = client.post("/v1/embeddings/inspect", json={"path": emb_path})
        assert resp.status_code == 200
        doc = resp.json()
        assert (doc["n"], doc["d"], doc["normalized"]) == (150, 10, True)

    def test_convert(self, client, tmp_path):
        src = tmp_path / "feats.npy"
        np.save(src, unit_rows(12, 4, seed=1) * 2.0)
        out = tmp_path / "feats.emb1"
        resp = client.post("/v1/embeddings/convert", json={"input": str(src), "output": str(out)})
        assert resp.status_code == 200
        from corepick import read_embeddings

        mat = read_embeddings(out)
        assert (mat.n, mat.d) == (12, 4)
        assert np.abs(np.linalg.norm(mat.data.astype(np.float64), axis=1) - 1).max() <= 1e-5
