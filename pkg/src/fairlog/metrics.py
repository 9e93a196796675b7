"""Predictive-performance and group-fairness metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


class MetricError(ValueError):
    pass


def statistical_disparity(scores: np.ndarray, groups: np.ndarray) -> float:
    """Mean score of the sensitive group (A=1) minus the other group.

    Signed: negative values mean the sensitive group receives lower
    scores. Scores may be probabilities or hard 0/1 decisions.
    """
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(groups).astype(bool)
    if not mask.any() or mask.all():
        raise MetricError("statistical disparity needs both groups nonempty")
    return float(scores[mask].mean() - scores[~mask].mean())


def _rates(predictions: np.ndarray, labels: np.ndarray) -> "tuple[float, float]":
    pos = labels.astype(bool)
    if not pos.any() or pos.all():
        raise MetricError("equalized odds needs both label values in each group")
    tpr = float(predictions[pos].mean())
    fpr = float(predictions[~pos].mean())
    return tpr, fpr


def equalized_odds_gap(predictions: np.ndarray, labels: np.ndarray, groups: np.ndarray) -> float:
    """max(|TPR1 - TPR0|, |FPR1 - FPR0|) over hard predictions."""
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels)
    mask = np.asarray(groups).astype(bool)
    if not mask.any() or mask.all():
        raise MetricError("equalized odds needs both groups nonempty")
    tpr1, fpr1 = _rates(predictions[mask], labels[mask])
    tpr0, fpr0 = _rates(predictions[~mask], labels[~mask])
    return float(max(abs(tpr1 - tpr0), abs(fpr1 - fpr0)))


def accuracy_f1(predictions: np.ndarray, labels: np.ndarray) -> "tuple[float, float]":
    """Accuracy and F1 of hard predictions; F1 is 0 when undefined."""
    predictions = np.asarray(predictions).astype(bool)
    labels = np.asarray(labels).astype(bool)
    if len(labels) == 0:
        raise MetricError("empty evaluation set")
    accuracy = float((predictions == labels).mean())
    tp = float((predictions & labels).sum())
    fp = float((predictions & ~labels).sum())
    fn = float((~predictions & labels).sum())
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom > 0 else 0.0
    return accuracy, f1


@dataclass
class EvalReport:
    """One evaluation of scores against labels, grouped by A."""

    accuracy: float
    f1: float
    disparity_score: float
    disparity_label: float
    eo_gap: Optional[float]
    pos_rate_sensitive: float
    pos_rate_other: float
    tpr_sensitive: Optional[float]
    tpr_other: Optional[float]
    fpr_sensitive: Optional[float]
    fpr_other: Optional[float]
    n_sensitive: int
    n_other: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_scores(
    scores: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    thresholds: "float | tuple[float, float]" = 0.5,
) -> EvalReport:
    """Full report; ``thresholds`` is global or (other, sensitive) per group.

    Score-based disparity is the primary fairness number; disparity of
    the thresholded decisions is reported alongside.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    mask = np.asarray(groups).astype(bool)
    if isinstance(thresholds, tuple):
        cut = np.where(mask, thresholds[1], thresholds[0])
    else:
        cut = np.full(len(scores), float(thresholds))
    hard = scores > cut
    accuracy, f1 = accuracy_f1(hard, labels)
    try:
        eo = equalized_odds_gap(hard, labels, mask)
        tpr1, fpr1 = _rates(hard[mask].astype(np.float64), labels[mask])
        tpr0, fpr0 = _rates(hard[~mask].astype(np.float64), labels[~mask])
    except MetricError:
        eo, tpr1, fpr1, tpr0, fpr0 = None, None, None, None, None
    return EvalReport(
        accuracy=accuracy,
        f1=f1,
        disparity_score=statistical_disparity(scores, mask),
        disparity_label=statistical_disparity(hard.astype(np.float64), mask),
        eo_gap=eo,
        pos_rate_sensitive=float(hard[mask].mean()),
        pos_rate_other=float(hard[~mask].mean()),
        tpr_sensitive=tpr1,
        tpr_other=tpr0,
        fpr_sensitive=fpr1,
        fpr_other=fpr0,
        n_sensitive=int(mask.sum()),
        n_other=int((~mask).sum()),
    )
