"""MinMax scaling, window splitting, Adam and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import (
    BadTrainConfig,
    DegenerateColumn,
    EmptyInput,
    LengthMismatch,
    ShapeMismatch,
    TooFewWindows,
)
from .graph import TemporalGraphSpec
from .gradients import backward
from .model import PARAM_NAMES, ModelDims, ModelParams, forward_batch, init_params, stack_windows
from .numerics import SeededRng

log = logging.getLogger(__name__)

SCALER_COLUMNS = ("G_sw", "G_lw", "T_air", "T_pv", "P_out")

# offsets added to TrainConfig.seed for each independent random stream
SPLIT_STREAM = 0
INIT_STREAM = 1
SHUFFLE_STREAM = 2


@dataclass(frozen=True)
class ScalerParams:
    columns: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.columns) == len(self.mins) == len(self.maxs)):
            raise ShapeMismatch("scaler columns, mins and maxs differ in length")
        for c, lo, hi in zip(self.columns, self.mins, self.maxs):
            if not hi - lo > 1e-12:
                raise DegenerateColumn(f"column {c} has range {hi - lo!r}")

    def index(self, col) -> int:
        return col if isinstance(col, int) else self.columns.index(col)

    def transform(self, raw: np.ndarray, warn: bool = True) -> np.ndarray:
        """Scale an ``(n, len(columns))`` array column-wise onto the training range."""
        raw = np.asarray(raw, dtype=np.float64)
        lo = np.array(self.mins)
        hi = np.array(self.maxs)
        out = (raw - lo) / (hi - lo)
        if warn:
            outside = int(np.count_nonzero((out < 0.0) | (out > 1.0)))
            if outside:
                log.warning("%d scaled values fall outside [0, 1] (beyond the training range)", outside)
        return out

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        lo = np.array(self.mins)
        hi = np.array(self.maxs)
        return np.asarray(scaled, dtype=np.float64) * (hi - lo) + lo

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "min": list(self.mins), "max": list(self.maxs)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(tuple(d["columns"]), tuple(float(v) for v in d["min"]), tuple(float(v) for v in d["max"]))


def fit_scaler(train_rows, columns=SCALER_COLUMNS) -> ScalerParams:
    """Column-wise min/max over training rows only (``(n, k)`` array, n >= 2)."""
    rows = np.asarray(train_rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] < 2:
        raise EmptyInput(f"need at least 2 rows to fit a scaler, got {rows.shape[0]}")
    if len(columns) != rows.shape[1]:
        columns = tuple(f"c{i}" for i in range(rows.shape[1]))
    mins = rows.min(axis=0)
    maxs = rows.max(axis=0)
    for c, lo, hi in zip(columns, mins, maxs):
        if hi - lo <= 1e-12:
            raise DegenerateColumn(f"column {c} is constant on the training rows")
    return ScalerParams(tuple(columns), tuple(float(v) for v in mins), tuple(float(v) for v in maxs))


def scale(x: float, col, s: ScalerParams) -> float:
    i = s.index(col)
    lo, hi = s.mins[i], s.maxs[i]
    y = (x - lo) / (hi - lo)
    if y < 0.0 or y > 1.0:
        log.warning("value %r of column %s lies outside the training range", x, s.columns[i])
    return y


def unscale(y: float, col, s: ScalerParams) -> float:
    i = s.index(col)
    lo, hi = s.mins[i], s.maxs[i]
    return y * (hi - lo) + lo


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    epochs: int = 100
    batch_size: int = 32
    window: int = 12
    horizon: int = 0
    split_ratio: float = 0.8
    split: str = "random"
    seed: int = 0
    gcn_hidden: int = 8
    hidden: int = 16

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise BadTrainConfig(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if not self.lr > 0.0:
            raise BadTrainConfig(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise BadTrainConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1 or self.window < 1 or self.horizon < 0:
            raise BadTrainConfig("batch_size and window must be >= 1, horizon >= 0")
        if self.split not in ("random", "chrono"):
            raise BadTrainConfig(f"split must be 'random' or 'chrono', got {self.split!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        """Build from string or typed values, ignoring unknown keys."""
        kwargs = {}
        for f in fields(cls):
            if f.name in values and values[f.name] is not None:
                kwargs[f.name] = type(f.default)(values[f.name])
        return cls(**kwargs)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: ModelParams, **kw) -> "AdamState":
        return cls({k: np.zeros_like(params.tensors[k]) for k in PARAM_NAMES},
                   {k: np.zeros_like(params.tensors[k]) for k in PARAM_NAMES}, **kw)


def adam_step(params: ModelParams, grads: dict, state: AdamState, lr: float) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update, tensors visited in ``PARAM_NAMES`` order."""
    t = state.t + 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_t, new_m, new_v = {}, {}, {}
    for name in PARAM_NAMES:
        p = params.tensors[name]
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        new_m[name], new_v[name] = m, v
        new_t[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    # shapes were checked above; finiteness is checked once per epoch by the caller
    return params.replace(new_t, check=False), AdamState(new_m, new_v, t, b1, b2, eps)


def mse_loss(preds, targets) -> float:
    a = np.asarray(preds, dtype=np.float64)
    b = np.asarray(targets, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    if a.size == 0:
        raise EmptyInput("mse of empty vectors")
    return float(np.mean((a - b) ** 2))


def split_indices(n: int, ratio: float, seed: int, mode: str = "random") -> tuple[list[int], list[int]]:
    """Train/test index lists: ``round(ratio * n)`` train items, the rest test."""
    if n < 2:
        raise TooFewWindows(f"need at least 2 windows to split, got {n}")
    n_train = min(n - 1, max(1, int(round(ratio * n))))
    if mode == "chrono":
        order = list(range(n))
    else:
        order = SeededRng(seed).permutation(n)
    return order[:n_train], order[n_train:]


def split_windows(windows, ratio: float, seed: int, mode: str = "random"):
    """Seeded shuffle then split a window list; returns ``(train, test)``."""
    windows = list(windows)
    tr, te = split_indices(len(windows), ratio, seed, mode)
    return [windows[i] for i in tr], [windows[i] for i in te]


@dataclass
class EpochStats:
    epoch: int
    train_mse: float
    test_mae: float | None

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_mse": self.train_mse, "test_mae": self.test_mae}


def _predict(x: np.ndarray, spec: TemporalGraphSpec, params: ModelParams, chunk: int = 4096) -> np.ndarray:
    if len(x) == 0:
        return np.zeros(0)
    return np.concatenate([forward_batch(x[i:i + chunk], spec, params) for i in range(0, len(x), chunk)])


def fit_windows(train_x, train_y, spec: TemporalGraphSpec, config: TrainConfig,
                test_x=None, test_y=None, params: ModelParams | None = None,
                progress=None) -> tuple[ModelParams, list[EpochStats]]:
    """Mini-batch Adam on stacked windows ``(B, L, |V|, d)`` and targets ``(B,)``.

    Each epoch reshuffles with a seeded stream, steps through mini-batches,
    then records the full-pass train MSE and (if given) test MAE.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    n = len(train_x)
    if n == 0:
        raise TooFewWindows("no training windows")
    if params is None:
        dims = ModelDims(spec.num_nodes, spec.feature_dim, config.gcn_hidden, config.hidden)
        params = init_params(config.seed + INIT_STREAM, dims)
    state = AdamState.zeros_like(params)
    rng = SeededRng(config.seed + SHUFFLE_STREAM)
    history: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        order = np.array(rng.permutation(n), dtype=np.int64)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            _, grads = backward((train_x[idx], train_y[idx]), spec, params)
            params, state = adam_step(params, grads, state, config.lr)
        train_mse = mse_loss(_predict(train_x, spec, params), train_y)
        test_mae = None
        if test_x is not None and len(test_x):
            test_mae = float(np.mean(np.abs(_predict(test_x, spec, params) - test_y)))
        stats = EpochStats(epoch, train_mse, test_mae)
        history.append(stats)
        if progress is not None:
            progress(stats)
        if not math.isfinite(train_mse):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
    return params, history


@dataclass
class TrainResult:
    params: ModelParams
    scaler: ScalerParams
    spec: TemporalGraphSpec
    config: TrainConfig
    history: list[EpochStats]
    train_index: list[int] = field(repr=False)
    test_index: list[int] = field(repr=False)

    @property
    def final_test_mae(self) -> float | None:
        return self.history[-1].test_mae


def train(records, spec: TemporalGraphSpec, config: TrainConfig, progress=None) -> TrainResult:
    """Window the records, split, fit the scaler on training rows, then run Adam.

    Windows (not raw samples) are split. The scaler is fitted on every row
    touched by a training window, so no test-only row influences it.
    """
    from .data import make_windows, node_columns, records_to_array  # data imports this module

    raw = records_to_array(records)
    L, k = config.window, config.horizon
    n_windows = len(raw) - L - k + 1
    if n_windows < 2:
        raise TooFewWindows(f"{len(raw)} records give {max(n_windows, 0)} windows of length {L} (horizon {k})")
    tr_idx, te_idx = split_indices(n_windows, config.split_ratio, config.seed + SPLIT_STREAM, config.split)

    touched = np.zeros(len(raw), dtype=bool)
    for s in tr_idx:
        touched[s:s + L + k] = True
    scaler = fit_scaler(raw[touched], SCALER_COLUMNS)

    windows = make_windows(records, scaler, L, k, node_columns(spec))
    x, y = stack_windows(windows)
    tr = np.array(tr_idx, dtype=np.int64)
    te = np.array(te_idx, dtype=np.int64)
    params, history = fit_windows(x[tr], y[tr], spec, config, x[te], y[te], progress=progress)
    return TrainResult(params, scaler, spec, config, history, list(tr_idx), list(te_idx))
