"""Ranking and classification metrics."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import MetricError


def _labels(labels) -> np.ndarray:
    y = np.asarray(labels)
    if not np.all((y == 0) | (y == 1)):
        raise MetricError("labels must be 0/1")
    return y.astype(bool)


def auroc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counting one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUROC needs both classes")
    ranks = rankdata(s)  # average ranks resolve ties
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: sum over thresholds of (recall step) x precision.

    Thresholds are the distinct scores in descending order, so tied scores
    enter the prediction set together and the result does not depend on the
    input order. Without ties this equals the mean of precision@k over the
    ranks k of the positives.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("AUPRC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s_sorted, hits = s[order], y[order]
    # last index of every block of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s_sorted) - 1]
    tp = np.cumsum(hits)[ends]
    precision = tp / (ends + 1)
    recall_step = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(recall_step * precision))


def f1(scores, labels, threshold: float = 0.5) -> float:
    """F1 of the rule ``score >= threshold``; 0 when precision + recall is 0."""
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(labels)
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    if tp == 0:
        return 0.0
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    return 2 * p * r / (p + r)
