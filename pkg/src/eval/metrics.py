from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata


def score_pair(Y: np.ndarray, i: int, j: int) -> float:
    """Cosine similarity of y_i and y_j; 0 when either vector is zero."""
    a, b = Y[i], Y[j]
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def score_pairs(Y: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Vectorised score_pair over an array of (i, j) rows."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    norms = np.linalg.norm(Y, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    Yn = Y / safe[:, None]
    return np.sum(Yn[pairs[:, 0]] * Yn[pairs[:, 1]], axis=1)


def auc(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """
    Probability that a random positive outscores a random negative, ties counted as 0.5.

    Computed exactly from average ranks (Mann-Whitney U).
    """
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if not len(pos) or not len(neg):
        raise ValueError("AUC needs at least one positive and one negative score")
    ranks = rankdata(np.concatenate([pos, neg]), method="average")
    n_pos, n_neg = len(pos), len(neg)
    u = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion_counts(pred: Sequence[int], truth: Sequence[int], classes: Optional[Sequence[int]] = None):
    """Per-class true positive, false positive and false negative counts over the label universe."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction and truth lengths differ: {pred.shape} vs {truth.shape}")
    if classes is None:
        classes = np.union1d(pred, truth)
    classes = np.asarray(classes, dtype=np.int64)
    tp = np.array([np.sum((pred == c) & (truth == c)) for c in classes], dtype=np.float64)
    fp = np.array([np.sum((pred == c) & (truth != c)) for c in classes], dtype=np.float64)
    fn = np.array([np.sum((pred != c) & (truth == c)) for c in classes], dtype=np.float64)
    return tp, fp, fn


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1.0), 0.0)


def micro_f1(pred: Sequence[int], truth: Sequence[int], classes: Optional[Sequence[int]] = None) -> float:
    tp, fp, fn = confusion_counts(pred, truth, classes)
    return float(_f1(tp.sum(), fp.sum(), fn.sum()))


def macro_f1(pred: Sequence[int], truth: Sequence[int], classes: Optional[Sequence[int]] = None) -> float:
    """Mean per-class F1 over ``classes`` (default: classes seen in pred or truth); absent classes score 0."""
    tp, fp, fn = confusion_counts(pred, truth, classes)
    if not len(tp):
        return 0.0
    return float(np.mean(_f1(tp, fp, fn)))
