import itertools

import numpy as np
import pytest

from corepick import (
    EmbeddingMatrix,
    InputError,
    ScoreFile,
    kcenter_select,
    load_score_file,
    random_select,
    score_select,
)

from conftest import unit_rows


def covering_radius(data, centers):
    # clamp: float32 self-similarity can exceed 1 by rounding
    dists = np.maximum(0.0, 1.0 - data.astype(np.float64) @ data[centers].astype(np.float64).T)
    return float(dists.min(axis=1).max())


class TestRandomSelect:
    def test_full_budget_permutation(self):
        res = random_select(8, 8, seed=0)
        assert sorted(res.indices) == list(range(8))

    def test_deterministic(self):
        assert random_select(50, 7, seed=3).indices == random_select(50, 7, seed=3).indices

    def test_uniform_frequencies(self):
        counts = np.zeros(10)
        trials = 10000
        for seed in range(trials):
            counts[random_select(10, 3, seed=seed).indices] += 1
        freqs = counts / trials
        assert np.all(np.abs(freqs - 0.3) <= 0.02)

    def test_budget_checked(self):
        with pytest.raises(InputError):
            random_select(3, 4, seed=0)
        with pytest.raises(InputError):
            random_select(3, 0, seed=0)


class TestKCenterSelect:
    def test_picks_antipodal_second_center(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], dtype=np.float32)
        mat = EmbeddingMatrix.from_array(rows, normalized=True)
        seed = next(s for s in range(50) if np.random.default_rng(s).integers(3) == 0)
        res = kcenter_select(mat, 2, seed=seed)
        assert res.indices[0] == 0
        assert res.indices[1] == 2

    def test_covering_radius_non_increasing_in_budget(self):
        mat = EmbeddingMatrix.from_array(unit_rows(40, 6, seed=1))
        radii = [covering_radius(mat.data, kcenter_select(mat, m, seed=5).indices) for m in range(1, 12)]
        assert all(a >= b - 1e-12 for a, b in zip(radii, radii[1:]))

    def test_step_distance_trace_non_increasing(self):
        mat = EmbeddingMatrix.from_array(unit_rows(60, 8, seed=2))
        res = kcenter_select(mat, 12, seed=1)
        gaps = [1.0 - s for s in res.match_similarity]
        assert all(a >= b - 1e-12 for a, b in zip(gaps, gaps[1:]))

    def test_two_approximation_on_small_instances(self):
        # Cosine distance is half the squared Euclidean distance, so the
        # greedy guarantee degrades in adversarial low-dimensional geometry;
        # random draws at moderate dimension sit well inside the 2x bound.
        rng = np.random.default_rng(3)
        for trial in range(8):
            n = int(rng.integers(5, 11))
            m = int(rng.integers(2, 5))
            mat = EmbeddingMatrix.from_array(unit_rows(n, 16, seed=300 + trial))
            greedy = covering_radius(mat.data, kcenter_select(mat, m, seed=trial).indices)
            best = min(covering_radius(mat.data, list(combo))
                       for combo in itertools.combinations(range(n), m))
            assert greedy <= 2 * best + 1e-12

    def test_duplicates_still_distinct(self):
        rows = np.tile(unit_rows(1, 4, seed=4), (6, 1))
        mat = EmbeddingMatrix.from_array(rows, normalized=True)
        res = kcenter_select(mat, 4, seed=0)
        assert len(set(res.indices)) == 4

    def test_determinism(self):
        mat = EmbeddingMatrix.from_array(unit_rows(30, 5, seed=5))
        assert kcenter_select(mat, 6, seed=9).indices == kcenter_select(mat, 6, seed=9).indices


class TestScoreSelect:
    def test_descending_picks_top(self):
        res = score_select(ScoreFile(scores=[0.1, 0.9, 0.5]), 2)
        assert res.indices == [1, 2]

    def test_ties_keep_smaller_index(self):
        res = score_select(ScoreFile(scores=[0.5, 0.5, 0.5]), 2)
        assert res.indices == [0, 1]

    def test_ascending_reverses_distinct_scores(self):
        scores = [0.1, 0.9, 0.5]
        asc = score_select(ScoreFile(scores=scores, direction="ascending"), 2)
        assert asc.indices == [0, 2]

    def test_descending_equals_ascending_of_negated(self):
        rng = np.random.default_rng(6)
        scores = rng.standard_normal(40)
        a = score_select(ScoreFile(scores=scores, direction="descending"), 15)
        b = score_select(ScoreFile(scores=-scores, direction="ascending"), 15)
        assert a.indices == b.indices

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError, match="non-finite"):
            ScoreFile(scores=[1.0, np.inf])


class TestLoadScoreFile:
    def test_flat_file(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("0.25\n-1.5\n3\n", encoding="utf-8")
        sf = load_score_file(path, n=3)
        assert sf.scores.tolist() == [0.25, -1.5, 3.0]

    def test_jsonl_file_keyed_by_id(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"id": 1, "score": 5.0}\n{"id": 0, "score": 2.0}\n', encoding="utf-8")
        sf = load_score_file(path, n=2)
        assert sf.scores.tolist() == [2.0, 5.0]

    def test_jsonl_ids_must_cover_rows(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"id": 0, "score": 5.0}\n{"id": 2, "score": 2.0}\n', encoding="utf-8")
        with pytest.raises(InputError, match="cover"):
            load_score_file(path)

    def test_length_mismatch(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("1\n2\n", encoding="utf-8")
        with pytest.raises(InputError, match="2 scores for 5 rows"):
            load_score_file(path, n=5)
