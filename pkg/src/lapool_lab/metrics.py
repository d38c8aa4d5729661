"""Binary/multi-label classification metrics.

AUCs are ``None`` when only one class is present; callers must treat that as
"undefined", never as 0.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def _flat(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"scores and labels differ in size: {s.size} vs {y.size}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary")
    return s, y


def roc_auc(scores, labels) -> float | None:
    """Mann-Whitney rank statistic; tied scores count one half."""
    s, y = _flat(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s)  # average ranks for ties
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(recall, precision) at every distinct score threshold, highest first."""
    s, y = _flat(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1.0 - y)
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp, fp = tp[last], fp[last]
    return tp / y.sum(), tp / (tp + fp)


def pr_auc(scores, labels) -> float | None:
    """Trapezoid area under the precision-recall staircase.

    The curve starts at recall 0 with the precision of the highest threshold,
    so constant scores give exactly the positive fraction.
    """
    s, y = _flat(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        return None
    recall, precision = pr_curve(s, y)
    recall = np.r_[0.0, recall]
    precision = np.r_[precision[0], precision]
    return float(np.sum(np.diff(recall) * (precision[1:] + precision[:-1]) / 2.0))


def micro_f1(scores, labels, threshold: float = 0.5) -> float:
    s, y = _flat(scores, labels)
    pred = s >= threshold
    tp = float(np.sum(pred & (y == 1)))
    fp = float(np.sum(pred & (y == 0)))
    fn = float(np.sum(~pred & (y == 1)))
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    s, y = _flat(scores, labels)
    return float(np.mean((s >= threshold) == (y == 1)))


def metrics(scores, labels, threshold: float = 0.5) -> dict:
    """micro-F1, ROC-AUC, PR-AUC and accuracy over all (graph, label) pairs."""
    return {
        "micro_f1": micro_f1(scores, labels, threshold),
        "roc_auc": roc_auc(scores, labels),
        "pr_auc": pr_auc(scores, labels),
        "accuracy": accuracy(scores, labels, threshold),
    }
