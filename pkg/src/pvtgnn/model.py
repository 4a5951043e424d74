"""Forward pass of the temporal graph network.

One window of ``L`` node-feature snapshots flows through

1. a graph-convolution layer applied independently at every step,
   ``z_i = relu(mean_{j in N(i)} W x_j + U x_i)``,
2. a single GRU cell fed with the concatenated node embeddings,
3. a linear head reading the last hidden state.

GRU equations (reset gate applied after the recurrent product)::

    r = sigmoid(W_r z + U_r h + b_r)
    u = sigmoid(W_z z + U_z h + b_z)
    n = tanh(W_n z + r * (U_n h) + b_n)
    h' = (1 - u) * n + u * h

All arrays are float64. Batched entry points take features shaped
``(batch, L, |V|, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import BadDims, ShapeMismatch
from .graph import TemporalGraphSpec
from .numerics import SeededRng, relu, sigmoid, uniform_init

PARAM_NAMES = (
    "gcn_W", "gcn_U",
    "W_r", "W_z", "W_n",
    "U_r", "U_z", "U_n",
    "b_r", "b_z", "b_n",
    "fc_w", "fc_b",
)


@dataclass(frozen=True)
class ModelDims:
    num_nodes: int
    feature_dim: int = 1
    gcn_hidden: int = 8
    hidden: int = 16

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise BadDims(f"{f.name} must be a positive integer, got {v!r}")

    @property
    def gru_input(self) -> int:
        return self.num_nodes * self.gcn_hidden

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        hg, d, h, gi = self.gcn_hidden, self.feature_dim, self.hidden, self.gru_input
        return {
            "gcn_W": (hg, d), "gcn_U": (hg, d),
            "W_r": (h, gi), "W_z": (h, gi), "W_n": (h, gi),
            "U_r": (h, h), "U_z": (h, h), "U_n": (h, h),
            "b_r": (h,), "b_z": (h,), "b_n": (h,),
            "fc_w": (h,), "fc_b": (),
        }


@dataclass
class ModelParams:
    """All learnable tensors plus the dimensions and seed they were built from."""

    dims: ModelDims
    init_seed: int
    tensors: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        if self.dims is not None:
            self.validate()

    def __getattr__(self, name):
        # only reached for names not found normally
        if name in PARAM_NAMES:
            return self.__dict__["tensors"][name]
        raise AttributeError(name)

    def validate(self) -> None:
        expected = self.dims.expected_shapes()
        if set(self.tensors) != set(expected):
            raise ShapeMismatch(f"parameter names {sorted(self.tensors)} do not match {sorted(expected)}")
        for name, shape in expected.items():
            t = self.tensors[name]
            if t.shape != shape:
                raise ShapeMismatch(f"{name} has shape {t.shape}, expected {shape}")
            if not np.all(np.isfinite(t)):
                raise ShapeMismatch(f"{name} contains non-finite values")

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, self.init_seed, {k: v.copy() for k, v in self.tensors.items()})

    def replace(self, tensors: dict[str, np.ndarray], check: bool = True) -> "ModelParams":
        new = {k: np.asarray(tensors[k], dtype=np.float64) for k in PARAM_NAMES}
        if check:
            return ModelParams(self.dims, self.init_seed, new)
        out = ModelParams(None, self.init_seed, new)  # skips validation
        out.dims = self.dims
        return out

    def num_scalars(self) -> int:
        return sum(t.size for t in self.tensors.values())


@dataclass
class FeatureWindow:
    steps: np.ndarray  # (L, |V|, d), scaled units
    target: float
    timestamp: int

    @property
    def length(self) -> int:
        return self.steps.shape[0]


def init_params(seed: int, dims: ModelDims) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    Matrices are drawn from one stream in :data:`PARAM_NAMES` order.
    """
    if not isinstance(dims, ModelDims):
        dims = ModelDims(*dims)
    rng = SeededRng(seed)
    hg, d, h, gi = dims.gcn_hidden, dims.feature_dim, dims.hidden, dims.gru_input
    t = {
        "gcn_W": uniform_init(rng, hg, d, d),
        "gcn_U": uniform_init(rng, hg, d, d),
        "W_r": uniform_init(rng, h, gi, gi),
        "W_z": uniform_init(rng, h, gi, gi),
        "W_n": uniform_init(rng, h, gi, gi),
        "U_r": uniform_init(rng, h, h, h),
        "U_z": uniform_init(rng, h, h, h),
        "U_n": uniform_init(rng, h, h, h),
        "b_r": np.zeros(h),
        "b_z": np.zeros(h),
        "b_n": np.zeros(h),
        "fc_w": uniform_init(rng, 1, h, h).reshape(h),
        "fc_b": np.array(0.0),
    }
    return ModelParams(dims, int(seed), t)


def zero_params(dims: ModelDims) -> ModelParams:
    return ModelParams(dims, 0, {k: np.zeros(s) for k, s in dims.expected_shapes().items()})


def _check_features(x: np.ndarray, spec: TemporalGraphSpec, params: ModelParams, lead: int) -> None:
    if x.ndim != lead + 2 or x.shape[-2:] != (spec.num_nodes, spec.feature_dim):
        raise ShapeMismatch(
            f"features of shape {x.shape} do not match graph (|V|={spec.num_nodes}, d={spec.feature_dim})"
        )
    if (params.dims.num_nodes, params.dims.feature_dim) != (spec.num_nodes, spec.feature_dim):
        raise ShapeMismatch(f"params built for {params.dims}, graph has |V|={spec.num_nodes}, d={spec.feature_dim}")


def gcn_forward(x_t, spec: TemporalGraphSpec, params: ModelParams) -> np.ndarray:
    """Node embeddings for one step, concatenated in node order (length ``|V|*H_g``)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.ndim == 1 and spec.feature_dim == 1:
        x_t = x_t[:, None]
    _check_features(x_t, spec, params, 0)
    agg = spec.aggregation_matrix() @ x_t
    pre = agg @ params.gcn_W.T + x_t @ params.gcn_U.T
    return relu(pre).reshape(-1)


def gru_step(z_flat, h_prev, params: ModelParams) -> np.ndarray:
    z = np.asarray(z_flat, dtype=np.float64)
    h = np.asarray(h_prev, dtype=np.float64)
    if z.shape != (params.dims.gru_input,) or h.shape != (params.dims.hidden,):
        raise ShapeMismatch(
            f"gru_step expects z of length {params.dims.gru_input} and h of length {params.dims.hidden}, "
            f"got {z.shape} and {h.shape}"
        )
    r = sigmoid(params.W_r @ z + params.U_r @ h + params.b_r)
    u = sigmoid(params.W_z @ z + params.U_z @ h + params.b_z)
    n = np.tanh(params.W_n @ z + r * (params.U_n @ h) + params.b_n)
    return (1.0 - u) * n + u * h


def fc_head(h, params: ModelParams) -> float:
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (params.dims.hidden,):
        raise ShapeMismatch(f"fc_head expects length {params.dims.hidden}, got {h.shape}")
    return float(h @ params.fc_w + params.fc_b)


@dataclass
class ForwardCache:
    x: np.ndarray        # (B, L, V, d)
    agg: np.ndarray      # (B, L, V, d)
    pre_gcn: np.ndarray  # (B, L, V, Hg)
    z: np.ndarray        # (B, L, V*Hg)
    hs: np.ndarray       # (B, L+1, H); hs[:, 0] is the zero initial state
    r: np.ndarray        # (B, L, H)
    u: np.ndarray
    n: np.ndarray
    hn: np.ndarray       # U_n h_{t-1}


def _gcn_batch(x: np.ndarray, spec: TemporalGraphSpec, params: ModelParams):
    # flattened to 2-D products; x is (..., V, d)
    V, d = x.shape[-2:]
    lead = x.shape[:-2]
    m = spec.aggregation_matrix()
    agg = (np.swapaxes(x, -1, -2).reshape(-1, V) @ m.T).reshape(lead + (d, V))
    agg = np.ascontiguousarray(np.swapaxes(agg, -1, -2))
    pre = agg.reshape(-1, d) @ params.gcn_W.T + x.reshape(-1, d) @ params.gcn_U.T
    return agg, pre.reshape(lead + (V, -1))


def forward_batch(x, spec: TemporalGraphSpec, params: ModelParams, keep_cache: bool = False):
    """Predictions for a batch of windows ``x`` shaped ``(B, L, |V|, d)``.

    Returns the ``(B,)`` prediction vector, or ``(pred, cache)`` when
    ``keep_cache`` is set.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_features(x, spec, params, 2)
    B, L = x.shape[:2]
    if L < 1:
        raise ShapeMismatch("window length must be >= 1")
    H = params.dims.hidden
    agg, pre_gcn = _gcn_batch(x, spec, params)
    z = relu(pre_gcn).reshape(B, L, -1)
    w_in = np.concatenate([params.W_r, params.W_z, params.W_n])
    b_in = np.concatenate([params.b_r, params.b_z, params.b_n])
    u_rec = np.concatenate([params.U_r, params.U_z, params.U_n]).T
    proj = (z.reshape(B * L, -1) @ w_in.T + b_in).reshape(B, L, 3 * H)

    hs = np.zeros((B, L + 1, H))
    r_all = np.empty((B, L, H))
    u_all = np.empty((B, L, H))
    n_all = np.empty((B, L, H))
    hn_all = np.empty((B, L, H))
    h = hs[:, 0]
    for t in range(L):
        rec = h @ u_rec
        gates = sigmoid(proj[:, t, :2 * H] + rec[:, :2 * H])
        r, u = gates[:, :H], gates[:, H:]
        hn = rec[:, 2 * H:]
        n = np.tanh(proj[:, t, 2 * H:] + r * hn)
        h = (1.0 - u) * n + u * h
        hs[:, t + 1] = h
        r_all[:, t], u_all[:, t], n_all[:, t], hn_all[:, t] = r, u, n, hn
    pred = h @ params.fc_w + params.fc_b
    if keep_cache:
        return pred, ForwardCache(x, agg, pre_gcn, z, hs, r_all, u_all, n_all, hn_all)
    return pred


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    """Stack FeatureWindows into ``(B, L, V, d)`` features and ``(B,)`` targets."""
    windows = list(windows)
    if not windows:
        return np.zeros((0, 0, 0, 0)), np.zeros(0)
    x = np.stack([w.steps for w in windows])
    y = np.array([w.target for w in windows], dtype=np.float64)
    return x, y


def model_forward(window: FeatureWindow, spec: TemporalGraphSpec, params: ModelParams) -> float:
    """Nowcast of scaled power at the window's final step."""
    return float(forward_batch(window.steps[None], spec, params)[0])


def predict_windows(windows, spec: TemporalGraphSpec, params: ModelParams, chunk: int = 4096) -> np.ndarray:
    x, _ = stack_windows(windows)
    if len(x) == 0:
        return np.zeros(0)
    return np.concatenate([forward_batch(x[i:i + chunk], spec, params) for i in range(0, len(x), chunk)])
