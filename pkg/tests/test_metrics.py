import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convres.exceptions import MetricError
from convres.metrics import (
    RankedPrediction,
    label_auc,
    macro_auc,
    metric_report,
    ndcg_at_k,
    precision_at_k,
    rank_k,
)
from oracles import auc_pair_oracle, ndcg_oracle, precision_oracle, rank_by_full_sort
from convres.numeric import SeededRng


class TestRankK:
    def test_basic(self):
        assert rank_k(np.array([0.1, 0.9, 0.5]), 2) == [1, 2]

    def test_tie_break_by_index(self):
        assert rank_k(np.array([0.3, 0.3, 0.3]), 2) == [0, 1]

    def test_k_larger_than_l(self):
        assert rank_k(np.array([0.2, 0.8]), 5) == [1, 0]

    @given(st.integers(0, 2**32), st.integers(1, 8), st.integers(1, 10))
    @settings(max_examples=100, deadline=None)
    def test_agrees_with_full_sort(self, seed, L, k):
        scores = SeededRng(seed).uniform(size=(L,))
        assert rank_k(scores, k) == rank_by_full_sort(list(scores), k)


class TestPrecisionAtK:
    def test_top2_all_true(self):
        pred = RankedPrediction(np.array([0.9, 0.1, 0.8, 0.2]), np.array([1, 0, 1, 0]))
        assert precision_at_k(pred, 2) == 1.0

    def test_top4_half_true(self):
        pred = RankedPrediction(np.array([0.9, 0.1, 0.8, 0.2]), np.array([1, 0, 1, 0]))
        assert precision_at_k(pred, 4) == 0.5

    def test_no_true_labels(self):
        pred = RankedPrediction(np.array([0.9, 0.1]), np.array([0, 0]))
        for k in (1, 2, 5):
            assert precision_at_k(pred, k) == 0.0


class TestNdcgAtK:
    def test_single_true_ranked_first(self):
        pred = RankedPrediction(np.array([0.9, 0.1, 0.2]), np.array([1, 0, 0]))
        assert ndcg_at_k(pred, 5) == 1.0

    def test_single_true_ranked_second(self):
        pred = RankedPrediction(np.array([0.5, 0.9, 0.2]), np.array([1, 0, 0]))
        expected = (1.0 / np.log2(3)) / (1.0 / np.log2(2))
        assert abs(ndcg_at_k(pred, 5) - expected) < 1e-12
        assert abs(ndcg_at_k(pred, 5) - 0.6309) < 1e-4

    def test_two_true_perfect(self):
        pred = RankedPrediction(np.array([0.9, 0.8, 0.1]), np.array([1, 1, 0]))
        assert ndcg_at_k(pred, 2) == 1.0

    def test_ideal_prefix_is_one(self):
        # all true labels in the top ranks and fewer of them than k
        pred = RankedPrediction(np.array([0.9, 0.8, 0.3, 0.2, 0.1]), np.array([1, 1, 0, 0, 0]))
        assert ndcg_at_k(pred, 4) == 1.0


class TestMacroAuc:
    def test_perfectly_separated(self):
        preds = [
            RankedPrediction(np.array([0.9, 0.1]), np.array([1, 0])),
            RankedPrediction(np.array([0.2, 0.8]), np.array([0, 1])),
        ]
        auc, per_label = macro_auc(preds)
        assert auc == 1.0
        assert per_label == [1.0, 1.0]

    def test_hand_pair_enumeration(self):
        scores = np.array([[0.9], [0.8], [0.3], [0.1]])
        truth = np.array([[1], [0], [1], [0]])
        preds = [RankedPrediction(scores[i], truth[i]) for i in range(4)]
        auc, _ = macro_auc(preds)
        assert auc == 0.75

    def test_random_scores_near_half(self):
        rng = SeededRng(11)
        n = 4000
        scores = rng.uniform(size=(n, 3))
        truth = (rng.uniform(size=(n, 3)) < 0.4).astype(float)
        auc, _ = macro_auc([RankedPrediction(scores[i], truth[i]) for i in range(n)])
        assert abs(auc - 0.5) < 0.02

    def test_degenerate_labels_skipped(self):
        preds = [
            RankedPrediction(np.array([0.9, 0.4]), np.array([1, 0])),
            RankedPrediction(np.array([0.1, 0.6]), np.array([0, 0])),
        ]
        auc, per_label = macro_auc(preds)
        assert per_label[1] is None  # label 1 has no positives
        assert auc == per_label[0] == 1.0

    def test_error_when_nothing_evaluable(self):
        preds = [RankedPrediction(np.array([0.9]), np.array([0]))]
        with pytest.raises(MetricError):
            macro_auc(preds)

    def test_ties_count_half(self):
        assert label_auc(np.array([0.5, 0.5]), np.array([1, 0])) == 0.5


class TestScoreTransformInvariance:
    @given(st.integers(0, 2**32), st.integers(2, 6), st.integers(1, 6))
    @settings(max_examples=60, deadline=None)
    def test_monotone_transform_preserves_ranking_metrics(self, seed, L, k):
        rng = SeededRng(seed)
        scores = rng.uniform(size=(L,))
        truth = (rng.uniform(size=(L,)) < 0.5).astype(float)
        pred = RankedPrediction(scores, truth)
        warped = RankedPrediction(np.exp(3.0 * scores) / (1 + np.exp(3.0 * scores)), truth)
        assert rank_k(pred.scores, k) == rank_k(warped.scores, k)
        assert precision_at_k(pred, k) == precision_at_k(warped, k)
        assert abs(ndcg_at_k(pred, k) - ndcg_at_k(warped, k)) < 1e-12

    @given(st.integers(0, 2**32))
    @settings(max_examples=30, deadline=None)
    def test_per_label_monotone_transform_preserves_auc(self, seed):
        rng = SeededRng(seed)
        scores = rng.uniform(size=(10, 3))
        truth = (rng.uniform(size=(10, 3)) < 0.5).astype(float)
        warped = scores.copy()
        warped[:, 0] = 2.0 * scores[:, 0] + 5.0
        warped[:, 1] = np.exp(scores[:, 1])
        warped[:, 2] = scores[:, 2] ** 3 + scores[:, 2]
        for l in range(3):
            a = label_auc(scores[:, l], truth[:, l])
            b = label_auc(warped[:, l], truth[:, l])
            assert a == b or (a is None and b is None)


class TestRangeAndMonotonicity:
    @given(st.integers(0, 2**32), st.integers(1, 8))
    @settings(max_examples=80, deadline=None)
    def test_metrics_in_unit_interval_and_hits_monotone(self, seed, L):
        rng = SeededRng(seed)
        pred = RankedPrediction(
            rng.uniform(size=(L,)), (rng.uniform(size=(L,)) < 0.5).astype(float)
        )
        hits = []
        for k in range(1, L + 2):
            p = precision_at_k(pred, k)
            n = ndcg_at_k(pred, k)
            assert 0.0 <= p <= 1.0 and 0.0 <= n <= 1.0
            hits.append(p * k)
        # the top-k true-label count never decreases as k grows
        assert all(b >= a - 1e-12 for a, b in zip(hits, hits[1:]))


class TestBruteForceAgreement:
    def test_thousand_random_instances(self):
        rng = SeededRng(99)
        for trial in range(1000):
            L = 1 + rng.integers(6)
            scores = rng.uniform(size=(L,))
            truth = (rng.uniform(size=(L,)) < 0.5).astype(float)
            pred = RankedPrediction(scores, truth)
            k = 1 + rng.integers(6)
            assert rank_k(scores, k) == rank_by_full_sort(list(scores), k)
            assert abs(precision_at_k(pred, k) - precision_oracle(scores, truth, k)) < 1e-12
            assert abs(ndcg_at_k(pred, k) - ndcg_oracle(scores, truth, k)) < 1e-12
            ours = label_auc(scores, truth)
            ref = auc_pair_oracle(list(scores), list(truth))
            if ref is None:
                assert ours is None
            else:
                assert abs(ours - ref) < 1e-12


class TestReport:
    def test_report_keys_and_ranges(self):
        rng = SeededRng(1)
        preds = [
            RankedPrediction(rng.uniform(size=(6,)), (rng.uniform(size=(6,)) < 0.5).astype(float))
            for _ in range(30)
        ]
        rep = metric_report(preds)
        assert list(rep) == [
            "p_at_1", "p_at_3", "p_at_5", "n_at_3", "n_at_5", "macro_auc", "per_label_auc",
        ]
        for key in ("p_at_1", "p_at_3", "p_at_5", "n_at_3", "n_at_5", "macro_auc"):
            assert 0.0 <= rep[key] <= 1.0

    def test_zero_label_documents_excluded_from_pk(self):
        good = RankedPrediction(np.array([0.9, 0.1]), np.array([1, 0]))
        control = RankedPrediction(np.array([0.9, 0.1]), np.array([0, 0]))
        rep = metric_report([good, control, control])
        assert rep["p_at_1"] == 1.0  # controls do not drag the average down
