"""
Training a nowcaster on synthetic telemetry
===========================================

Two clear-sky days at one-minute resolution, 12-step windows, MSE loss and
Adam. Twenty epochs is enough to see the test error settle; the library
defaults are lr 0.01 and 100 epochs.
"""

import numpy as np

from pvtgnn.data import Checkpoint, GeneratorConfig, generate_synthetic, records_to_array
from pvtgnn.graph import build_parameter_graph
from pvtgnn.metrics import mae, mpe
from pvtgnn.pipeline import predict_records
from pvtgnn.training import TrainConfig, train

records = generate_synthetic(GeneratorConfig(days=2, seed=3))
raw = records_to_array(records)
print(len(records), "records")
print("peak irradiance %.0f W/m2, peak power %.0f W" % (raw[:, 0].max(), raw[:, 4].max()))

spec = build_parameter_graph()
config = TrainConfig(epochs=20, seed=0)
result = train(records, spec, config,
               progress=lambda s: print(f"epoch {s.epoch:2d}  mse {s.train_mse:.2e}  test mae {s.test_mae:.4f}")
               if s.epoch % 5 == 0 else None)

# scaled error on held-out windows, then the whole file in watts
print("final test MAE (scaled):", round(result.final_test_mae, 4))
preds = predict_records(Checkpoint(result.params, result.scaler, spec, config), records)
print("MAE over all windows (W): %.2f" % mae(preds.actual_w, preds.predicted_w))
print("MPE over daylight (%%): %.2f" % mpe(preds.actual, preds.predicted))

# a slice of the prediction trace around noon of the second day
noon = np.searchsorted(preds.timestamps, records[0].timestamp + 86400 + 12 * 3600)
for k in range(noon, noon + 5):
    print(preds.timestamps[k], "%.1f W" % preds.actual_w[k], "%.1f W" % preds.predicted_w[k])
