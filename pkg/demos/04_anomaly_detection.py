"""
Flagging power drops from prediction residuals
==============================================

Power at 5% of the daylight points is cut to 30-70% of its value. The model
is trained on the corrupted file as is; the drops then stand out as large
absolute residuals. Z-scores of the residuals get Tukey fences, and only the
upper fence flags.
"""

import numpy as np

from pvtgnn.anomaly import detect
from pvtgnn.data import Checkpoint, GeneratorConfig, generate_dataset
from pvtgnn.graph import build_parameter_graph
from pvtgnn.metrics import detection_scores
from pvtgnn.pipeline import align_labels, predict_records
from pvtgnn.training import TrainConfig, train

records, labels = generate_dataset(GeneratorConfig(days=3, seed=7, anomaly_fraction=0.05))
print(sum(labels), "injected drops in", len(records), "records")

spec = build_parameter_graph()
config = TrainConfig(epochs=15, seed=1)
result = train(records, spec, config)
preds = predict_records(Checkpoint(result.params, result.scaler, spec, config), records)

report = detect(preds.actual, preds.predicted, preds.timestamps)
print("residual mean %.4f, std %.4f" % (report.mean, report.std))
print("fences on Z: lower %.3f, upper %.3f" % (report.lower_bound, report.upper_bound))
print("flagged fraction %.4f" % report.anomaly_fraction)
print("box plot of |e|:", {k: round(v, 4) for k, v in report.box_stats.items()})

truth = align_labels(preds.timestamps, dict(zip((r.timestamp for r in records), labels)))
print(detection_scores(report.flags, truth))

# the largest residuals and whether they were injected
top = np.argsort(report.residuals)[::-1][:5]
for k in top:
    print(preds.timestamps[k], "z=%.1f" % report.zscores[k], "injected" if truth[k] else "clean")
