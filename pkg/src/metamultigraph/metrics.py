"""Classification and ranking metrics computed from first principles."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import ShapeError


def f1_scores(y_true, y_pred) -> tuple[float, float]:
    """(macro-F1, micro-F1) over the union of classes present in either array.

    Per-class F1 is 2TP / (2TP + FP + FN), defined as 0 when the
    denominator vanishes. Micro-F1 pools counts over classes, which for
    single-label prediction equals accuracy.
    """
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"label arrays differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ShapeError("f1_scores: empty label arrays")
    classes = np.union1d(y_true, y_pred)
    per_class = np.empty(classes.size, dtype=np.float64)
    tp_total = fp_total = fn_total = 0
    for k, c in enumerate(classes):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        denom = 2 * tp + fp + fn
        per_class[k] = (2.0 * tp / denom) if denom else 0.0
        tp_total += tp
        fp_total += fp
        fn_total += fn
    macro = float(per_class.mean())
    micro_denom = 2 * tp_total + fp_total + fn_total
    micro = (2.0 * tp_total / micro_denom) if micro_denom else 0.0
    return macro, float(micro)


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true).reshape(-1)
    y_pred = np.asarray(y_pred).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"label arrays differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ShapeError("accuracy: empty label arrays")
    return float(np.mean(y_true == y_pred))


def auc_score(scores, labels) -> float:
    """Area under the ROC curve via midranks.

    Equals the probability that a random positive outscores a random
    negative, with ties counted as one half. Requires both labels present.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if scores.shape != labels.shape:
        raise ShapeError(f"scores shape {scores.shape} != labels shape {labels.shape}")
    if not np.all(np.isin(labels, (0, 1))):
        raise ShapeError("auc_score: labels must be 0 or 1")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ShapeError("auc_score: need at least one positive and one negative")
    if not np.all(np.isfinite(scores)):
        raise ShapeError("auc_score: non-finite scores")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
