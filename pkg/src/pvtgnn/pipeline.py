"""Glue between a checkpoint and a telemetry file: predictions, reports, metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import anomaly, metrics
from .data import POWER_COLUMN, Checkpoint, make_windows, node_columns
from .model import predict_windows


@dataclass
class Predictions:
    timestamps: list[int]
    actual: np.ndarray          # scaled
    predicted: np.ndarray       # scaled
    actual_w: np.ndarray
    predicted_w: np.ndarray


def predict_records(ckpt: Checkpoint, records) -> Predictions:
    """Nowcasts for every full window in ``records`` using the checkpoint's scaler."""
    cfg = ckpt.config
    windows = make_windows(records, ckpt.scaler, cfg.window, cfg.horizon, node_columns(ckpt.spec))
    pred = predict_windows(windows, ckpt.spec, ckpt.params)
    actual = np.array([w.target for w in windows])
    lo, hi = ckpt.scaler.mins[POWER_COLUMN], ckpt.scaler.maxs[POWER_COLUMN]
    return Predictions(
        timestamps=[w.timestamp for w in windows],
        actual=actual,
        predicted=pred,
        actual_w=actual * (hi - lo) + lo,
        predicted_w=pred * (hi - lo) + lo,
    )


def align_labels(timestamps, labels: dict[int, bool]) -> np.ndarray:
    missing = [t for t in timestamps if t not in labels]
    if missing:
        raise KeyError(f"{len(missing)} predicted timestamps have no label (first: {missing[0]})")
    return np.array([labels[t] for t in timestamps], dtype=bool)


def evaluation(preds: Predictions, labels: dict[int, bool] | None = None, mpe_eps: float = 0.05) -> dict:
    """Metrics document: mae, mpe, anomaly_fraction and, with labels, precision/recall/f1."""
    report = anomaly.detect(preds.actual, preds.predicted, preds.timestamps)
    out = {
        "n": len(preds.timestamps),
        "mae": metrics.mae(preds.actual, preds.predicted),
        "mpe": metrics.mpe(preds.actual, preds.predicted, mpe_eps),
        "mpe_eps": mpe_eps,
        "anomaly_fraction": report.anomaly_fraction,
    }
    if labels is not None:
        truth = align_labels(preds.timestamps, labels)
        out["injected_fraction"] = float(np.mean(truth)) if truth.size else 0.0
        out.update(metrics.detection_scores(report.flags, truth))
    return out
