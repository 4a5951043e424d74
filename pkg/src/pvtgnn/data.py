"""Telemetry records, CSV I/O, windowing, checkpoints and the synthetic generator.

CSV layout (header must match exactly)::

    timestamp,gsw_wm2,glw_wm2,tair_c,tpv_c,pout_w

``timestamp`` is integer UTC seconds. Floats are written with ``repr`` so a
write/parse round trip is exact.

Synthetic generator
-------------------
For record ``k`` at ``t = start + k * period_s`` with local hour ``hr``
(UTC, no time zone), ``f = (hr - sunrise) / (sunset - sunrise)`` and a per-day
amplitude ``a_day ~ U(day_amplitude)`` drawn at the first record of each day::

    clear = g_max * a_day * sin(pi f) ** 1.2        for 0 < f < 1, else 0
    G_sw  = max(0, clear + N(0, noise_gsw))         if clear > 0, else 0
    G_lw  = 300 + 0.1 G_sw + N(0, noise_glw)
    T_air = 15 + 10 sin(2 pi (hr - 9) / 24) + N(0, noise_tair)
    T_pv  = T_air + 0.03 G_sw + N(0, noise_tpv)
    P     = max(0, p_stc (G_sw / 1000) (1 - gamma (T_pv - 25)) + N(0, noise_p))  if G_sw > 0, else 0

Five normals are drawn for every record in the order above (gsw, glw, tair,
tpv, p), whether or not they are used, from one :class:`SeededRng` stream.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import (
    BadConfig,
    BadFraction,
    BadHeader,
    BadRow,
    CorruptCheckpoint,
    NonMonotonicTimestamps,
    ShapeMismatch,
    TooShort,
    VersionMismatch,
)
from .graph import TemporalGraphSpec
from .model import PARAM_NAMES, FeatureWindow, ModelDims, ModelParams
from .numerics import SeededRng
from .training import ScalerParams, TrainConfig

log = logging.getLogger(__name__)

CSV_HEADER = ("timestamp", "gsw_wm2", "glw_wm2", "tair_c", "tpv_c", "pout_w")
LABELS_HEADER = ("timestamp", "is_anomaly")
NODE_COLUMNS = {"G_sw": 0, "G_lw": 1, "T_air": 2, "T_pv": 3}
POWER_COLUMN = 4
CHECKPOINT_VERSION = 1
DAYTIME_GSW = 50.0


@dataclass(frozen=True)
class MonitoringRecord:
    timestamp: int
    g_sw: float
    g_lw: float
    t_air: float
    t_pv: float
    p_out: float

    def values(self) -> tuple[float, float, float, float, float]:
        return (self.g_sw, self.g_lw, self.t_air, self.t_pv, self.p_out)


def records_to_array(records) -> np.ndarray:
    """``(n, 5)`` array of G_sw, G_lw, T_air, T_pv, P_out."""
    if isinstance(records, np.ndarray):
        return records
    return np.array([r.values() for r in records], dtype=np.float64).reshape(-1, 5)


def node_columns(spec: TemporalGraphSpec) -> list[int]:
    try:
        return [NODE_COLUMNS[name] for name in spec.node_names]
    except KeyError as e:
        raise BadConfig(f"graph node {e.args[0]!r} is not a telemetry channel {sorted(NODE_COLUMNS)}") from None


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([str(int(r.timestamp))] + [repr(float(v)) for v in r.values()])


def parse_csv(path) -> list[MonitoringRecord]:
    """Read and validate a telemetry CSV.

    Raises
    ------
    BadHeader
        Header differs from ``CSV_HEADER``.
    BadRow
        Wrong field count, unparsable or non-finite value, negative
        irradiance or power.
    NonMonotonicTimestamps
        Timestamps not strictly increasing.
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise BadHeader(f"expected header {','.join(CSV_HEADER)}, got {header}")
        prev = None
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise BadRow(line_no, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                ts = int(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError as e:
                raise BadRow(line_no, str(e)) from None
            if not all(math.isfinite(v) for v in vals):
                raise BadRow(line_no, "non-finite value")
            if vals[0] < 0 or vals[1] < 0 or vals[4] < 0:
                raise BadRow(line_no, "irradiance and power must be non-negative")
            if prev is not None and ts <= prev:
                raise NonMonotonicTimestamps(f"line {line_no}: timestamp {ts} does not follow {prev}")
            prev = ts
            records.append(MonitoringRecord(ts, *vals))
    if len(records) > 2:
        steps = np.diff([r.timestamp for r in records])
        if np.any(steps != steps[0]):
            log.warning("%s: sampling period is not uniform", path)
    return records


def write_labels(records, labels, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELS_HEADER)
        for r, flag in zip(records, labels):
            w.writerow([int(r.timestamp), int(bool(flag))])


def read_labels(path) -> dict[int, bool]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LABELS_HEADER:
            raise BadHeader(f"expected header {','.join(LABELS_HEADER)}, got {header}")
        out = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out[int(row[0])] = bool(int(row[1]))
            except (ValueError, IndexError):
                raise BadRow(line_no, f"bad label row {row}") from None
    return out


def make_windows(records, scaler: ScalerParams, L: int, horizon: int = 0,
                 columns=(0, 1, 2, 3)) -> list[FeatureWindow]:
    """Stride-1 sliding windows of scaled node features.

    Window ``s`` covers rows ``s .. s+L-1``; its target is scaled power at row
    ``s+L-1+horizon`` and its timestamp is that row's timestamp.
    """
    raw = records_to_array(records)
    n = len(raw)
    if L < 1 or horizon < 0:
        raise TooShort(f"window length must be >= 1 and horizon >= 0 (got L={L}, horizon={horizon})")
    if n < L + horizon:
        raise TooShort(f"{n} records cannot fill a window of {L} with horizon {horizon}")
    scaled = scaler.transform(raw)
    feats = scaled[:, list(columns)][:, :, None]  # (n, V, 1)
    power = scaled[:, POWER_COLUMN]
    stamps = [int(r.timestamp) for r in records] if not isinstance(records, np.ndarray) else list(range(n))
    count = n - L - horizon + 1
    out = []
    for s in range(count):
        end = s + L - 1 + horizon
        out.append(FeatureWindow(feats[s:s + L], float(power[end]), stamps[end]))
    return out


@dataclass(frozen=True)
class GeneratorConfig:
    days: int = 10
    period_s: int = 60
    seed: int = 0
    g_max: float = 1000.0
    p_stc: float = 350.0
    temp_coeff: float = 0.004
    noise_gsw: float = 5.0
    noise_glw: float = 3.0
    noise_tair: float = 0.2
    noise_tpv: float = 0.3
    noise_p: float = 0.5
    anomaly_fraction: float = 0.0
    drop_range: tuple[float, float] = (0.3, 0.7)
    start_timestamp: int = 1680307200  # 2023-04-01T00:00:00Z
    sunrise_h: float = 6.0
    sunset_h: float = 18.0
    day_amplitude: tuple[float, float] = (0.85, 1.0)

    def validate(self) -> None:
        if self.days < 1:
            raise BadConfig(f"days must be >= 1, got {self.days}")
        if self.period_s < 1 or 86400 % self.period_s:
            raise BadConfig(f"period_s must divide 86400, got {self.period_s}")
        if not 0.0 <= self.anomaly_fraction < 1.0:
            raise BadConfig(f"anomaly_fraction must be in [0, 1), got {self.anomaly_fraction}")
        lo, hi = self.drop_range
        if not 0.0 <= lo <= hi < 1.0:
            raise BadConfig(f"drop_range must lie in [0, 1), got {self.drop_range}")
        if not 0.0 <= self.sunrise_h < self.sunset_h <= 24.0:
            raise BadConfig("need 0 <= sunrise < sunset <= 24")
        a, b = self.day_amplitude
        if not 0.0 < a <= b:
            raise BadConfig(f"day_amplitude must satisfy 0 < lo <= hi, got {self.day_amplitude}")
        noises = (self.noise_gsw, self.noise_glw, self.noise_tair, self.noise_tpv, self.noise_p)
        if self.g_max <= 0 or self.p_stc <= 0 or min(noises) < 0:
            raise BadConfig("g_max and p_stc must be positive and noise levels non-negative")


def generate_synthetic(config: GeneratorConfig) -> list[MonitoringRecord]:
    """Clear-sky PV telemetry, ``days * 86400 / period_s`` records (see module docs)."""
    config.validate()
    rng = SeededRng(config.seed)
    per_day = 86400 // config.period_s
    daylen = config.sunset_h - config.sunrise_h
    records = []
    amp = 1.0
    for k in range(config.days * per_day):
        if k % per_day == 0:
            amp = rng.uniform(*config.day_amplitude)
        sec = (k % per_day) * config.period_s
        hr = sec / 3600.0
        eps = [rng.normal() for _ in range(5)]
        f = (hr - config.sunrise_h) / daylen
        clear = config.g_max * amp * math.sin(math.pi * f) ** 1.2 if 0.0 < f < 1.0 else 0.0
        g_sw = max(0.0, clear + config.noise_gsw * eps[0]) if clear > 0.0 else 0.0
        g_lw = 300.0 + 0.1 * g_sw + config.noise_glw * eps[1]
        t_air = 15.0 + 10.0 * math.sin(2.0 * math.pi * (hr - 9.0) / 24.0) + config.noise_tair * eps[2]
        t_pv = t_air + 0.03 * g_sw + config.noise_tpv * eps[3]
        if g_sw > 0.0:
            p = config.p_stc * (g_sw / 1000.0) * (1.0 - config.temp_coeff * (t_pv - 25.0))
            p = max(0.0, p + config.noise_p * eps[4])
        else:
            p = 0.0
        records.append(MonitoringRecord(config.start_timestamp + k * config.period_s, g_sw, g_lw, t_air, t_pv, p))
    return records


def inject_anomalies(records, fraction: float, drop_range=(0.3, 0.7), seed: int = 0):
    """Multiply power at ``floor(fraction * n_daytime)`` random daytime points by U(drop_range).

    Daytime means ``G_sw > 50 W/m2``. Returns ``(new_records, labels)`` with
    labels marking exactly the modified indices; inputs are untouched.
    """
    if not 0.0 <= fraction < 1.0:
        raise BadFraction(f"fraction must be in [0, 1), got {fraction}")
    lo, hi = drop_range
    if not 0.0 <= lo <= hi < 1.0:
        raise BadFraction(f"drop_range must lie in [0, 1), got {drop_range}")
    records = list(records)
    labels = [False] * len(records)
    daytime = [i for i, r in enumerate(records) if r.g_sw > DAYTIME_GSW]
    k = int(math.floor(fraction * len(daytime)))
    if k == 0:
        return records, labels
    rng = SeededRng(seed)
    chosen = [daytime[j] for j in rng.permutation(len(daytime))[:k]]
    for i in chosen:
        u = rng.uniform(lo, hi)
        records[i] = replace(records[i], p_out=records[i].p_out * u)
        labels[i] = True
    return records, labels


def generate_dataset(config: GeneratorConfig):
    """Generator output with ``config.anomaly_fraction`` injected; returns ``(records, labels)``.

    Injection uses its own stream seeded with ``config.seed + 1``.
    """
    records = generate_synthetic(config)
    return inject_anomalies(records, config.anomaly_fraction, config.drop_range, config.seed + 1)


@dataclass
class Checkpoint:
    params: ModelParams
    scaler: ScalerParams
    spec: TemporalGraphSpec
    config: TrainConfig


def checkpoint_document(params: ModelParams, scaler: ScalerParams, spec: TemporalGraphSpec,
                        config: TrainConfig) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "dims": asdict(params.dims),
        "seed": params.init_seed,
        "graph": spec.to_dict(),
        "scaler": scaler.to_dict(),
        "config": config.to_dict(),
        "weights": {
            name: {"shape": list(params.tensors[name].shape),
                   "data": [float(v) for v in params.tensors[name].reshape(-1)]}
            for name in PARAM_NAMES
        },
    }


def save_checkpoint(params, scaler, spec, config, path) -> None:
    doc = checkpoint_document(params, scaler, spec, config)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorruptCheckpoint(f"{path}: {e}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptCheckpoint(f"{path}: not a checkpoint document")
    if doc["format_version"] != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: format_version {doc['format_version']}, expected {CHECKPOINT_VERSION}")
    try:
        dims = ModelDims(**doc["dims"])
        spec = TemporalGraphSpec.from_dict(doc["graph"])
        scaler = ScalerParams.from_dict(doc["scaler"])
        known = {f.name for f in fields(TrainConfig)}
        config = TrainConfig(**{k: v for k, v in doc["config"].items() if k in known})
        weights = doc["weights"]
        tensors = {}
        for name in PARAM_NAMES:
            w = weights[name]
            shape = tuple(w["shape"])
            data = np.array(w["data"], dtype=np.float64)
            if data.size != int(np.prod(shape, dtype=np.int64)):
                raise ShapeMismatch(f"{name}: {data.size} values for shape {shape}")
            tensors[name] = data.reshape(shape)
        seed = int(doc["seed"])
    except (KeyError, TypeError) as e:
        raise CorruptCheckpoint(f"{path}: missing or malformed field {e}") from None
    if (dims.num_nodes, dims.feature_dim) != (spec.num_nodes, spec.feature_dim):
        raise ShapeMismatch(f"dims {dims} disagree with graph of {spec.num_nodes} nodes")
    if len(scaler.columns) != 5:
        raise ShapeMismatch(f"scaler has {len(scaler.columns)} columns, expected 5")
    params = ModelParams(dims, seed, tensors)
    return Checkpoint(params, scaler, spec, config)
