"""Temporal graph network (graph convolution + GRU) for PV power nowcasting
and residual-based anomaly detection, written on plain numpy."""

from .anomaly import AnomalyReport, detect, flag_anomalies, flag_residuals, iqr_bounds, residuals, zscores
from .data import (
    Checkpoint,
    GeneratorConfig,
    MonitoringRecord,
    generate_dataset,
    generate_synthetic,
    inject_anomalies,
    load_checkpoint,
    make_windows,
    parse_csv,
    save_checkpoint,
    write_csv,
)
from .gradients import backward, finite_diff_grad, gradient_check
from .graph import TemporalGraphSpec, aggregation_weight, build_parameter_graph
from .metrics import detection_scores, mae, mpe
from .model import (
    FeatureWindow,
    ModelDims,
    ModelParams,
    fc_head,
    forward_batch,
    gcn_forward,
    gru_step,
    init_params,
    model_forward,
)
from .numerics import SeededRng, matmul, uniform_init
from .training import AdamState, ScalerParams, TrainConfig, adam_step, fit_scaler, mse_loss, split_windows, train

__version__ = "0.1.0"
