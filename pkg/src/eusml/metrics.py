"""Confusion matrices and the three evaluation measures.

Balanced accuracy is the mean of per-class recalls; weighted precision and
weighted recall are support-weighted means of the per-class values (weighted
recall coincides with plain accuracy, trace/total).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """k x k counts; rows are true classes, columns are predictions."""

    k: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.k, self.k):
            raise ValueError(f"counts must be {self.k}x{self.k}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion-matrix entries must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(
    true_labels: Sequence[int], predicted_labels: Sequence[int], k: int
) -> ConfusionMatrix:
    true_arr = np.asarray(true_labels, dtype=np.int64)
    pred_arr = np.asarray(predicted_labels, dtype=np.int64)
    if true_arr.shape != pred_arr.shape or true_arr.ndim != 1:
        raise ValueError(
            f"label sequences must be 1-D and equal length, got {true_arr.shape} vs {pred_arr.shape}"
        )
    for name, arr in (("true", true_arr), ("predicted", pred_arr)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise ValueError(f"{name} labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true_arr, pred_arr), 1)
    return ConfusionMatrix(k=k, counts=counts)


def _require_full_support(cm: ConfusionMatrix) -> np.ndarray:
    supports = cm.supports
    empty = np.flatnonzero(supports == 0)
    if empty.size:
        raise ValueError(f"metric undefined: classes {empty.tolist()} have no samples")
    return supports


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean over classes of TP_i / (TP_i + FN_i)."""
    supports = _require_full_support(cm)
    recalls = np.diag(cm.counts) / supports
    return float(recalls.mean())


def per_class_precision(cm: ConfusionMatrix) -> tuple[np.ndarray, list[int]]:
    """P_i = counts[i][i] / column_i sum, with empty columns reported as 0 and
    their class indices returned as flags."""
    col_sums = cm.counts.sum(axis=0)
    undefined = np.flatnonzero(col_sums == 0).tolist()
    safe = np.where(col_sums == 0, 1, col_sums)
    precision = np.diag(cm.counts) / safe
    precision = np.where(col_sums == 0, 0.0, precision)
    return precision, undefined


def weighted_precision(cm: ConfusionMatrix) -> float:
    """Support-weighted mean of per-class precision."""
    if cm.total == 0:
        raise ValueError("metric undefined on an all-zero confusion matrix")
    supports = _require_full_support(cm)
    precision, _ = per_class_precision(cm)
    return float((supports * precision).sum() / supports.sum())


def weighted_recall(cm: ConfusionMatrix) -> float:
    """Support-weighted mean of per-class recall (equals trace/total)."""
    supports = _require_full_support(cm)
    recalls = np.diag(cm.counts) / supports
    return float((supports * recalls).sum() / supports.sum())


@dataclass(frozen=True)
class EvalReport:
    balanced_accuracy: float
    weighted_precision: float
    weighted_recall: float
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    supports: tuple[int, ...]
    undefined_precision_classes: tuple[int, ...] = field(default=())

    def to_json(self) -> str:
        doc = {
            "balanced_accuracy": self.balanced_accuracy,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "per_class": {
                "precision": list(self.per_class_precision),
                "recall": list(self.per_class_recall),
                "support": list(self.supports),
            },
            "undefined_precision_classes": list(self.undefined_precision_classes),
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def evaluate(cm: ConfusionMatrix) -> EvalReport:
    supports = _require_full_support(cm)
    precision, undefined = per_class_precision(cm)
    recalls = np.diag(cm.counts) / supports
    return EvalReport(
        balanced_accuracy=balanced_accuracy(cm),
        weighted_precision=weighted_precision(cm),
        weighted_recall=weighted_recall(cm),
        per_class_precision=tuple(float(p) for p in precision),
        per_class_recall=tuple(float(r) for r in recalls),
        supports=tuple(int(s) for s in supports),
        undefined_precision_classes=tuple(undefined),
    )


def format_table_row(method: str, report: EvalReport) -> str:
    """One comparison-table row: method, BA, precision, recall as percentages."""
    return (
        f"{method:<14s} {100 * report.balanced_accuracy:5.1f} "
        f"{100 * report.weighted_precision:5.1f} {100 * report.weighted_recall:5.1f}"
    )


TABLE_HEADER = f"{'method':<14s} {'BA':>5s} {'prec':>5s} {'rec':>5s}"
