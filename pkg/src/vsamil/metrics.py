"""Ranking and thresholded classification metrics."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError


def auroc(scores, labels):
    """Probability a random positive outscores a random negative.

    Rank-based Mann-Whitney formulation; tied scores contribute 1/2,
    matching exhaustive pair counting exactly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError(f"auroc: scores {scores.shape} and labels {labels.shape} must be 1-D and equal")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("auroc: need at least one positive and one negative label")

    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auroc_pair_oracle(scores, labels):
    """O(n^2) pair-ordering reference: fraction of correctly ordered
    (positive, negative) pairs, ties counting 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels != 1]
    if len(pos) == 0 or len(neg) == 0:
        raise DataError("auroc: need both classes")
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


@dataclass
class MetricsReport:
    accuracy: float
    auroc: float  # None when only one class is present
    tp: int
    fp: int
    tn: int
    fn: int
    n_bags: int

    def to_json(self):
        return {"accuracy": self.accuracy, "auroc": self.auroc,
                "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "n_bags": self.n_bags}


def metrics_report(scores, labels):
    """Threshold scores at 0 into {-1,+1} and tabulate against labels."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError(f"metrics: scores {scores.shape} vs labels {labels.shape}")
    preds = np.where(scores > 0, 1, -1)
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels != 1)))
    tn = int(np.sum((preds == -1) & (labels != 1)))
    fn = int(np.sum((preds == -1) & (labels == 1)))
    n = len(labels)
    both = len(set(np.asarray(labels).tolist())) == 2
    return MetricsReport(
        accuracy=(tp + tn) / n,
        auroc=auroc(scores, labels) if both else None,
        tp=tp, fp=fp, tn=tn, fn=fn, n_bags=n)
