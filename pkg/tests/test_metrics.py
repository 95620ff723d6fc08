"""Tests for evaluation metrics.

map_at_r is verified against a deliberately naive oracle written as
nested loops with no shared code; TF-IDF values are checked against
hand arithmetic.
"""

import math
import random
from collections import Counter

import numpy as np
import pytest
import torch

from hiercode.errors import DegenerateCorpus, EmptyInput
from hiercode.metrics import (
    MapAtRResult,
    accuracy,
    category_tfidf_similarity,
    corpus_subtoken_prf,
    map_at_r,
    subtoken_prf,
)


def oracle_map_at_r(embeddings, labels):
    """Literal transcription of the definition; no vectorization."""
    E = [list(map(float, row)) for row in embeddings]

    def cos(a, b):
        dot = sum(x * y for x, y in zip(a, b))
        na = math.sqrt(sum(x * x for x in a)) or 1e-12
        nb = math.sqrt(sum(x * x for x in b)) or 1e-12
        return dot / (na * nb)

    per_query = []
    scores = []
    skipped = []
    for q in range(len(E)):
        R = sum(1 for l in labels if l == labels[q]) - 1
        if R == 0:
            per_query.append(None)
            skipped.append(q)
            continue
        ranked = sorted(
            (j for j in range(len(E)) if j != q),
            key=lambda j: (-cos(E[q], E[j]), j),
        )
        hits = 0
        ap = 0.0
        for k in range(1, R + 1):
            if labels[ranked[k - 1]] == labels[q]:
                hits += 1
                ap += hits / k
        per_query.append(ap / R)
        scores.append(ap / R)
    return sum(scores) / len(scores), per_query, skipped


class TestAccuracy:
    def test_basic(self):
        assert accuracy([1, 2, 3], [1, 0, 3]) == pytest.approx(2 / 3)

    def test_perfect_and_zero(self):
        assert accuracy([1, 1], [1, 1]) == 1.0
        assert accuracy([0, 0], [1, 1]) == 0.0

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            accuracy([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([1], [1, 2])


class TestMapAtR:
    def test_perfect_clusters_score_one(self):
        # Two tight clusters far apart: every query ranks all its
        # positives ahead of every negative.
        rng = np.random.default_rng(0)
        a = np.array([10.0, 0.0]) + 0.01 * rng.standard_normal((4, 2))
        b = np.array([0.0, 10.0]) + 0.01 * rng.standard_normal((4, 2))
        E = np.vstack([a, b])
        labels = [0] * 4 + [1] * 4
        result = map_at_r(E, labels)
        assert result.mean == pytest.approx(1.0)
        assert result.skipped == []

    def test_positive_ranked_second_scores_zero(self):
        # Query 0 has R=1; its positive sits behind a negative, so the
        # single counted rank is a miss and AP@R is exactly 0.
        E = np.array([
            [1.0, 0.0],
            [0.0, 1.0],   # positive for query 0, orthogonal
            [0.9, 0.1],   # negative, nearly parallel to query 0
        ])
        labels = [0, 0, 1]
        result = map_at_r(E, labels)
        assert result.per_query[0] == pytest.approx(0.0)
        assert result.skipped == [2]

    def test_single_member_labels_skipped_and_recorded(self):
        E = np.eye(4)
        labels = [0, 0, 1, 2]
        result = map_at_r(E, labels)
        assert result.skipped == [2, 3]
        assert result.per_query[2] is None and result.per_query[3] is None
        assert result.per_query[0] is not None

    def test_all_single_member_raises(self):
        with pytest.raises(EmptyInput):
            map_at_r(np.eye(3), [0, 1, 2])

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            map_at_r(np.zeros((0, 4)), [])

    def test_matches_naive_oracle_on_random_instances(self):
        rng = random.Random(7)
        np_rng = np.random.default_rng(7)
        for _ in range(50):
            n = rng.randint(3, 20)
            d = rng.randint(2, 6)
            n_labels = rng.randint(1, 5)
            labels = [rng.randrange(n_labels) for _ in range(n)]
            if max(Counter(labels).values()) < 2:
                labels[1] = labels[0]
            E = np_rng.standard_normal((n, d))
            got = map_at_r(E, labels)
            mean, per_query, skipped = oracle_map_at_r(E, labels)
            assert got.mean == pytest.approx(mean, abs=1e-9)
            assert got.skipped == skipped
            for a, b in zip(got.per_query, per_query):
                if b is None:
                    assert a is None
                else:
                    assert a == pytest.approx(b, abs=1e-9)

    def test_invariant_to_positive_row_rescaling(self):
        rng = np.random.default_rng(3)
        E = rng.standard_normal((10, 4))
        labels = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2]
        base = map_at_r(E, labels)
        scales = rng.uniform(0.1, 50.0, size=(10, 1))
        scaled = map_at_r(E * scales, labels)
        assert scaled.mean == pytest.approx(base.mean, abs=1e-9)

    def test_accepts_torch_tensors(self):
        E = torch.randn(6, 3, generator=torch.Generator().manual_seed(0))
        labels = [0, 0, 0, 1, 1, 1]
        result = map_at_r(E, labels)
        assert isinstance(result, MapAtRResult)
        assert 0.0 <= result.mean <= 1.0


class TestSubtokenPRF:
    def test_frozen_example(self):
        p, r, f1 = subtoken_prf(["get", "count"], ["get", "item", "count"])
        assert p == pytest.approx(1.0)
        assert r == pytest.approx(2.0 / 3.0)
        assert f1 == pytest.approx(0.8)

    def test_empty_prediction(self):
        p, r, f1 = subtoken_prf([], ["get"])
        assert (p, r, f1) == (0.0, 0.0, 0.0)

    def test_both_empty(self):
        assert subtoken_prf([], []) == (0.0, 0.0, 0.0)

    def test_multiset_counting(self):
        # Duplicates only match as many times as they occur on both sides.
        p, r, _ = subtoken_prf(["a", "a", "b"], ["a", "b", "b"])
        assert p == pytest.approx(2.0 / 3.0)
        assert r == pytest.approx(2.0 / 3.0)

    def test_swap_transposes_precision_and_recall(self):
        rng = random.Random(11)
        pool = ["get", "set", "item", "count", "run", "x"]
        for _ in range(20):
            a = [rng.choice(pool) for _ in range(rng.randint(0, 5))]
            b = [rng.choice(pool) for _ in range(rng.randint(0, 5))]
            pa, ra, fa = subtoken_prf(a, b)
            pb, rb, fb = subtoken_prf(b, a)
            assert pa == pytest.approx(rb)
            assert ra == pytest.approx(pb)
            assert fa == pytest.approx(fb)

    def test_corpus_micro_average(self):
        # Pair 1: overlap 2, pred 2, target 3. Pair 2: overlap 1, pred 2,
        # target 1. Micro: P = 3/4, R = 3/4.
        pairs = [
            (["get", "count"], ["get", "item", "count"]),
            (["run", "fast"], ["run"]),
        ]
        p, r, f1 = corpus_subtoken_prf(pairs)
        assert p == pytest.approx(0.75)
        assert r == pytest.approx(0.75)
        assert f1 == pytest.approx(0.75)

    def test_corpus_empty_raises(self):
        with pytest.raises(EmptyInput):
            corpus_subtoken_prf([])


class TestCategoryTfidfSimilarity:
    def test_hand_computed_three_categories(self):
        # A = "a b", B = "a c", C = "d". idf: a = ln(3/2), b = c = d = ln 3.
        # cos(A, B) = ln(1.5)^2 / (ln(1.5)^2 + ln(3)^2); A,C and B,C share
        # nothing.
        cats = {"A": [["a", "b"]], "B": [["a", "c"]], "C": [["d"]]}
        result = category_tfidf_similarity(cats)
        l15, l3 = math.log(1.5), math.log(3.0)
        expected_ab = l15 * l15 / (l15 * l15 + l3 * l3)
        assert result.matrix[0, 1] == pytest.approx(expected_ab, abs=1e-12)
        assert result.matrix[0, 2] == 0.0
        assert result.matrix[1, 2] == 0.0
        assert result.mean == pytest.approx(expected_ab / 3.0, abs=1e-12)

    def test_matrix_shape_and_symmetry(self):
        cats = {"x": [["a"]], "y": [["a", "b"]], "z": [["b", "c"]]}
        result = category_tfidf_similarity(cats)
        assert result.matrix.shape == (3, 3)
        assert np.allclose(result.matrix, result.matrix.T)
        assert np.allclose(np.diag(result.matrix), 1.0)

    def test_disjoint_categories_score_zero(self):
        cats = {"A": [["a", "a"]], "B": [["b"]]}
        result = category_tfidf_similarity(cats)
        assert result.matrix[0, 1] == 0.0
        assert result.mean == 0.0

    def test_identical_categories_score_one_by_convention(self):
        # Every term appears in every category, so idf is zero and all
        # vectors vanish; identical raw counts fall back to 1.0.
        cats = {"A": [["a", "b"]], "B": [["a", "b"]]}
        result = category_tfidf_similarity(cats)
        assert result.matrix[0, 1] == 1.0
        assert result.mean == 1.0

    def test_raw_counts_not_normalized(self):
        # tf is the raw count: repeating a shared token shifts cosine
        # weight toward it.
        base = category_tfidf_similarity(
            {"A": [["a", "b"]], "B": [["a", "c"]], "C": [["z"]]}
        )
        heavy = category_tfidf_similarity(
            {"A": [["a", "a", "a", "b"]], "B": [["a", "c"]], "C": [["z"]]}
        )
        assert heavy.matrix[0, 1] > base.matrix[0, 1]

    def test_multiple_programs_concatenated(self):
        split = category_tfidf_similarity(
            {"A": [["a"], ["b"]], "B": [["a", "c"]], "C": [["z"]]}
        )
        joined = category_tfidf_similarity(
            {"A": [["a", "b"]], "B": [["a", "c"]], "C": [["z"]]}
        )
        assert np.allclose(split.matrix, joined.matrix)

    def test_single_category_raises(self):
        with pytest.raises(DegenerateCorpus):
            category_tfidf_similarity({"A": [["a"]]})

    def test_empty_category_raises(self):
        with pytest.raises(DegenerateCorpus):
            category_tfidf_similarity({"A": [["a"]], "B": [[]]})
