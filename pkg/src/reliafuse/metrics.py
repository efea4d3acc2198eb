"""Evaluation metrics: accuracy, ranking AUC, macro precision/recall/F1.

AUC uses tie-averaged ranks (Mann-Whitney), which agrees exactly with the
exhaustive pairwise statistic (#{pos > neg} + 0.5 #{ties}) / (#pos #neg).
Precision/recall/F1 are macro averaged: computed per class, then averaged;
undefined per-class ratios count as 0. Multi-label emotion metrics are
label-wise (binary per label, macro averaged over the 8 labels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TaskMetrics:
    """All fields are fractions in [0, 1]; reports render them as percentages."""

    accuracy: float
    auc: float
    precision: float
    recall: float
    f1: float

    def as_percent(self) -> dict[str, float]:
        return {
            "accuracy": 100.0 * self.accuracy,
            "auc": 100.0 * self.auc,
            "precision": 100.0 * self.precision,
            "recall": 100.0 * self.recall,
            "f1": 100.0 * self.f1,
        }


def _tie_averaged_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def binary_auc(scores, positives) -> float:
    """Probability a positive outscores a negative, ties counting half.

    Returns 0.5 when either class is absent (the statistic is undefined).
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = _tie_averaged_ranks(scores)
    rank_sum = ranks[positives].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def macro_auc_ovr(proba: np.ndarray, labels: np.ndarray) -> float:
    """One-vs-rest AUC averaged over classes present with both outcomes."""
    proba = np.asarray(proba, dtype=np.float64)
    labels = np.asarray(labels)
    values = []
    for c in range(proba.shape[1]):
        mask = labels == c
        if mask.any() and (~mask).any():
            values.append(binary_auc(proba[:, c], mask))
    return float(np.mean(values)) if values else 0.5


def multilabel_auc(proba: np.ndarray, truth: np.ndarray) -> float:
    """Per-label binary AUC macro averaged; degenerate labels are skipped."""
    proba = np.asarray(proba, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    values = []
    for c in range(proba.shape[1]):
        col = truth[:, c]
        if col.any() and (~col).any():
            values.append(binary_auc(proba[:, c], col))
    return float(np.mean(values)) if values else 0.5


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return float(np.mean(y_true == y_pred))


def multilabel_accuracy(truth: np.ndarray, pred: np.ndarray) -> float:
    """Label-wise accuracy averaged over all (sample, label) decisions."""
    return float(np.mean(np.asarray(truth, dtype=bool) == np.asarray(pred, dtype=bool)))


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    mat = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(np.asarray(y_true), np.asarray(y_pred)):
        mat[int(t), int(p)] += 1
    return mat


def macro_prf_from_confusion(mat: np.ndarray) -> tuple[float, float, float]:
    """Macro precision/recall/F1 from a [true, pred] confusion matrix."""
    mat = np.asarray(mat, dtype=np.float64)
    n = mat.shape[0]
    precisions, recalls, f1s = [], [], []
    for c in range(n):
        tp = mat[c, c]
        fp = mat[:, c].sum() - tp
        fn = mat[c, :].sum() - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    return float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(f1s))


def macro_prf(y_true, y_pred, n_classes: int) -> tuple[float, float, float]:
    return macro_prf_from_confusion(confusion_matrix(y_true, y_pred, n_classes))


def multilabel_prf(truth: np.ndarray, pred: np.ndarray) -> tuple[float, float, float]:
    """Per-label binary precision/recall/F1 macro averaged over the labels."""
    truth = np.asarray(truth, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    precisions, recalls, f1s = [], [], []
    for c in range(truth.shape[1]):
        tp = float(np.sum(truth[:, c] & pred[:, c]))
        fp = float(np.sum(~truth[:, c] & pred[:, c]))
        fn = float(np.sum(truth[:, c] & ~pred[:, c]))
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    return float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(f1s))


def classification_metrics(y_true, y_pred, proba: np.ndarray, n_classes: int) -> TaskMetrics:
    """Single-label task metrics; AUC is binary for 2 classes, else macro OvR."""
    if n_classes == 2:
        auc = binary_auc(np.asarray(proba)[:, 1], np.asarray(y_true) == 1)
    else:
        auc = macro_auc_ovr(proba, y_true)
    p, r, f = macro_prf(y_true, y_pred, n_classes)
    return TaskMetrics(accuracy=accuracy(y_true, y_pred), auc=auc, precision=p, recall=r, f1=f)


def multilabel_metrics(truth: np.ndarray, proba: np.ndarray, threshold: float) -> TaskMetrics:
    pred = np.asarray(proba) >= threshold
    p, r, f = multilabel_prf(truth, pred)
    return TaskMetrics(
        accuracy=multilabel_accuracy(truth, pred),
        auc=multilabel_auc(proba, truth),
        precision=p,
        recall=r,
        f1=f,
    )
