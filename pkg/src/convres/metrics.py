"""Ranking metrics for multi-label prediction: P@k, nDCG@k, macro AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import MetricError


@dataclass
class RankedPrediction:
    """Per-document scores in [0, 1] alongside the binary ground truth."""

    scores: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.truth = np.asarray(self.truth, dtype=np.float64)
        assert self.scores.shape == self.truth.shape


def rank_k(scores: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest scores, descending; ties by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[: min(k, scores.size)]]


def precision_at_k(pred: RankedPrediction, k: int) -> float:
    """Fraction of true labels among the top k; the denominator is always k."""
    top = rank_k(pred.scores, k)
    return float(pred.truth[top].sum()) / k


def ndcg_at_k(pred: RankedPrediction, k: int) -> float:
    """Rank-discounted gain of the top k, normalized by the ideal ranking.

    Gains are discounted by log2(rank position + 1). Documents with no true
    labels get 0 here and are excluded from corpus averages by the caller.
    """
    n_pos = int(pred.truth.sum())
    if n_pos == 0:
        return 0.0
    top = rank_k(pred.scores, k)
    dcg = sum(pred.truth[l] / np.log2(r + 2.0) for r, l in enumerate(top))
    ideal = sum(1.0 / np.log2(r + 2.0) for r in range(min(k, n_pos)))
    return float(dcg / ideal)


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties receiving the average of their rank span."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def label_auc(scores: np.ndarray, truth: np.ndarray) -> float | None:
    """Rank-statistic AUC for one label; None when positives or negatives are absent.

    Equivalent to the Mann-Whitney statistic with ties counting one half.
    """
    truth = np.asarray(truth, dtype=bool)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(np.asarray(scores, dtype=np.float64))
    return float((ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_auc(preds: list[RankedPrediction]) -> tuple[float, list[float | None]]:
    """Unweighted mean of per-label AUCs, skipping degenerate labels."""
    if not preds:
        raise MetricError("macro AUC needs at least one prediction")
    scores = np.stack([p.scores for p in preds])
    truth = np.stack([p.truth for p in preds])
    per_label = [label_auc(scores[:, l], truth[:, l]) for l in range(scores.shape[1])]
    usable = [a for a in per_label if a is not None]
    if not usable:
        raise MetricError("no label has both a positive and a negative instance")
    return float(np.mean(usable)), per_label


def metric_report(preds: list[RankedPrediction]) -> dict:
    """The standard report: P@{1,3,5}, N@{3,5}, macro AUC, per-label AUCs.

    P@k and N@k average only documents with at least one true label.
    """
    auc, per_label = macro_auc(preds)
    labeled = [p for p in preds if p.truth.sum() > 0]
    report = {}
    for k in (1, 3, 5):
        vals = [precision_at_k(p, k) for p in labeled]
        report[f"p_at_{k}"] = float(np.mean(vals)) if vals else 0.0
    for k in (3, 5):
        vals = [ndcg_at_k(p, k) for p in labeled]
        report[f"n_at_{k}"] = float(np.mean(vals)) if vals else 0.0
    report["macro_auc"] = auc
    report["per_label_auc"] = per_label
    return report
