"""Prediction and detection metrics (scaled power units)."""

from __future__ import annotations

import numpy as np

from .errors import EmptyInput, LengthMismatch, NoQualifyingSamples


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape:
        raise LengthMismatch(f"{a.shape} vs {p.shape}")
    return a, p


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    if a.size == 0:
        raise EmptyInput("mae of empty vectors")
    return float(np.mean(np.abs(a - p)))


def mpe(actual, predicted, eps: float = 0.05) -> float:
    """Mean absolute percentage error over samples with ``actual > eps``.

    The threshold drops night-time and near-zero power, where a percentage
    error is meaningless.
    """
    a, p = _pair(actual, predicted)
    keep = a > eps
    if not np.any(keep):
        raise NoQualifyingSamples(f"no actual value exceeds eps={eps}")
    return float(100.0 * np.mean(np.abs(a[keep] - p[keep]) / a[keep]))


def detection_scores(flags, truth) -> dict:
    """Precision, recall and F1 of boolean flags against truth labels.

    Precision is 0 when nothing is flagged; ``degenerate`` notes that case
    and the no-positive-truth case.
    """
    f = np.asarray(flags, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if f.shape != t.shape:
        raise LengthMismatch(f"{f.shape} vs {t.shape}")
    tp = int(np.count_nonzero(f & t))
    fp = int(np.count_nonzero(f & ~t))
    fn = int(np.count_nonzero(~f & t))
    notes = []
    if tp + fp == 0:
        precision = 0.0
        notes.append("no predicted positives")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        notes.append("no true positives in labels")
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "degenerate": "; ".join(notes) or None,
    }
