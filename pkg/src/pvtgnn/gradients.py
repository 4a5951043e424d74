"""Backpropagation through time for the mean-squared-error loss, and a
central-difference oracle to check it against.

Gradients are returned as a dict keyed by :data:`~pvtgnn.model.PARAM_NAMES`,
each array shaped like the matching parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatch
from .graph import TemporalGraphSpec, build_parameter_graph
from .model import PARAM_NAMES, ModelDims, ModelParams, forward_batch, init_params
from .numerics import SeededRng

GradientSet = dict  # name -> ndarray, same shapes as ModelParams.tensors


def _as_batch(batch):
    x, y = batch
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 4 or len(x) == 0:
        raise EmptyBatch("batch must hold at least one window")
    return x, y


def loss_only(batch, spec: TemporalGraphSpec, params: ModelParams) -> float:
    x, y = _as_batch(batch)
    diff = forward_batch(x, spec, params) - y
    return float(np.mean(diff * diff))


def backward(batch, spec: TemporalGraphSpec, params: ModelParams) -> tuple[float, GradientSet]:
    """MSE loss over ``batch = (x, y)`` and its gradient for every parameter.

    ``x`` is ``(B, L, |V|, d)``, ``y`` is ``(B,)``. The ReLU subgradient at
    zero is taken as zero.
    """
    x, y = _as_batch(batch)
    p = params.tensors
    pred, c = forward_batch(x, spec, params, keep_cache=True)
    B, L = x.shape[:2]
    diff = pred - y
    loss = float(np.mean(diff * diff))
    dpred = 2.0 * diff / B

    g = {}
    H = params.dims.hidden
    h_last = c.hs[:, L]
    g["fc_w"] = h_last.T @ dpred
    g["fc_b"] = np.array(dpred.sum())
    dh = dpred[:, None] * p["fc_w"][None, :]

    # gate blocks stacked in r, z(update), n order, matching forward_batch
    u_rec = np.concatenate([p["U_r"], p["U_z"], p["U_n"]])
    dU = np.zeros((3 * H, H))
    dpre_gates = np.empty((B, L, 3 * H))
    for t in range(L - 1, -1, -1):
        h_prev = c.hs[:, t]
        r, u, n, hn = c.r[:, t], c.u[:, t], c.n[:, t], c.hn[:, t]
        dn_pre = dh * (1.0 - u) * (1.0 - n * n)
        du_pre = dh * (h_prev - n) * u * (1.0 - u)
        dr_pre = dn_pre * hn * r * (1.0 - r)
        dhn = dn_pre * r
        drec = np.concatenate([dr_pre, du_pre, dhn], axis=1)
        dU += drec.T @ h_prev
        dpre_gates[:, t] = np.concatenate([dr_pre, du_pre, dn_pre], axis=1)
        dh = dh * u + drec @ u_rec

    g["U_r"], g["U_z"], g["U_n"] = dU[:H], dU[H:2 * H], dU[2 * H:]
    flat = dpre_gates.reshape(B * L, 3 * H)
    dW = flat.T @ c.z.reshape(B * L, -1)
    g["W_r"], g["W_z"], g["W_n"] = dW[:H], dW[H:2 * H], dW[2 * H:]
    db = flat.sum(axis=0)
    g["b_r"], g["b_z"], g["b_n"] = db[:H], db[H:2 * H], db[2 * H:]
    w_in = np.concatenate([p["W_r"], p["W_z"], p["W_n"]])
    dz = flat @ w_in

    V, Hg, d = params.dims.num_nodes, params.dims.gcn_hidden, params.dims.feature_dim
    dpre = (dz.reshape(B, L, V, Hg) * (c.pre_gcn > 0.0)).reshape(-1, Hg)
    g["gcn_W"] = dpre.T @ c.agg.reshape(-1, d)
    g["gcn_U"] = dpre.T @ c.x.reshape(-1, d)
    return loss, {k: g[k] for k in PARAM_NAMES}


def _mT(a):
    return np.swapaxes(a, -1, -2)


def reference_loss(x, y, spec: TemporalGraphSpec, tensors: dict):
    """MSE loss evaluated step by step in ``numpy.longdouble``.

    Written independently of :func:`~pvtgnn.model.forward_batch` so the
    finite-difference oracle does not share code with the path it checks.
    Any tensor may carry one extra leading axis of size ``P`` (a stack of
    perturbed copies); the result then has shape ``(P,)``.
    """
    ld = np.longdouble
    t = {k: np.asarray(v, dtype=ld) for k, v in tensors.items()}
    x = np.asarray(x, dtype=ld)
    base = {"gcn_W": 2, "gcn_U": 2, "W_r": 2, "W_z": 2, "W_n": 2, "U_r": 2, "U_z": 2, "U_n": 2,
            "b_r": 1, "b_z": 1, "b_n": 1, "fc_w": 1, "fc_b": 0}
    stacked = {k: t[k].ndim > base[k] for k in base}
    # biases and head weights of a stack need a batch axis to broadcast against (P, B, H)
    for k in ("b_r", "b_z", "b_n", "fc_w"):
        if stacked[k]:
            t[k] = t[k][:, None, :]
    if stacked["fc_b"]:
        t["fc_b"] = t["fc_b"][:, None]

    B, L, V, _ = x.shape
    H = t["U_r"].shape[-1]
    h = np.zeros((B, H), dtype=ld)
    for step in range(L):
        xs = x[:, step]
        parts = []
        for i in range(V):
            pre = xs[:, i] @ _mT(t["gcn_U"])
            nbrs = spec.in_neighbors(i)
            if nbrs:
                msg = sum(xs[:, j] @ _mT(t["gcn_W"]) for j in nbrs)
                pre = pre + msg / ld(len(nbrs))
            parts.append(np.where(pre > 0, pre, ld(0)))
        parts = np.broadcast_arrays(*parts)
        z = np.concatenate(parts, axis=-1)
        r = 1 / (1 + np.exp(-(z @ _mT(t["W_r"]) + h @ _mT(t["U_r"]) + t["b_r"])))
        u = 1 / (1 + np.exp(-(z @ _mT(t["W_z"]) + h @ _mT(t["U_z"]) + t["b_z"])))
        n = np.tanh(z @ _mT(t["W_n"]) + r * (h @ _mT(t["U_n"])) + t["b_n"])
        h = (1 - u) * n + u * h
    pred = np.sum(h * t["fc_w"], axis=-1) + t["fc_b"]
    d = pred - np.asarray(y, dtype=ld)
    return np.mean(d * d, axis=-1)


def finite_diff_grad(batch, spec: TemporalGraphSpec, params: ModelParams, h: float = 1e-5,
                     chunk: int = 256) -> GradientSet:
    """Central differences ``(L(theta + h e_k) - L(theta - h e_k)) / 2h`` for every scalar.

    The loss is evaluated in ``numpy.longdouble``; on x86-64 that is 80-bit
    extended precision, which keeps rounding noise well below the truncation
    error even for coordinates whose gradient is ~1e-9. Where ``longdouble``
    is plain float64 the oracle still works but is noisier. Perturbed copies
    are evaluated ``chunk`` at a time.
    """
    x, y = _as_batch(batch)
    xl = np.asarray(x, dtype=np.longdouble)
    work = {k: np.asarray(v, dtype=np.longdouble) for k, v in params.tensors.items()}
    step = np.longdouble(h)
    grads = {}
    for name in PARAM_NAMES:
        base = work[name]
        size = base.size
        gflat = np.zeros(size)
        for lo in range(0, size, chunk):
            ks = np.arange(lo, min(size, lo + chunk))
            stack = np.broadcast_to(base.reshape(-1), (len(ks), size)).copy()
            losses = []
            for sign in (1, -1):
                pert = stack.copy()
                pert[np.arange(len(ks)), ks] += sign * step
                trial = dict(work)
                trial[name] = pert.reshape((len(ks),) + base.shape)
                losses.append(reference_loss(xl, y, spec, trial))
            gflat[ks] = ((losses[0] - losses[1]) / (2 * step)).astype(np.float64)
        grads[name] = gflat.reshape(base.shape)
    return grads


def max_relative_error(a: GradientSet, f: GradientSet) -> float:
    """Largest ``|a - f| / max(1e-8, |a| + |f|)`` over all coordinates."""
    worst = 0.0
    for name in PARAM_NAMES:
        num = np.abs(a[name] - f[name])
        den = np.maximum(1e-8, np.abs(a[name]) + np.abs(f[name]))
        if num.size:
            worst = max(worst, float(np.max(num / den)))
    return worst


@dataclass
class GradCheckReport:
    seed: int
    max_rel_err: float
    tol: float
    passed: bool
    num_params: int
    resamples: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "max_rel_err": self.max_rel_err,
            "tol": self.tol,
            "pass": self.passed,
            "num_params": self.num_params,
            "resamples": self.resamples,
        }


def random_problem(seed: int, dims: ModelDims, window: int = 12, batch_size: int = 8,
                   spec: TemporalGraphSpec | None = None, kink_margin: float = 1e-4,
                   max_tries: int = 100):
    """Random parameters and batch whose ReLU pre-activations stay clear of zero.

    Returns ``(spec, params, (x, y), resamples)``. Biases and the output bias
    are randomised too so every gradient path is exercised.
    """
    if spec is None:
        spec = build_parameter_graph()
    rng = SeededRng(seed)
    for attempt in range(max_tries):
        params = init_params(rng.next_u64(), dims)
        t = dict(params.tensors)
        H = dims.hidden
        for b in ("b_r", "b_z", "b_n"):
            t[b] = rng.uniform_array((H,), -0.5, 0.5)
        t["fc_b"] = np.array(rng.uniform(-0.5, 0.5))
        params = params.replace(t)
        x = rng.uniform_array((batch_size, window, dims.num_nodes, dims.feature_dim), 0.0, 1.0)
        y = rng.uniform_array((batch_size,), 0.0, 1.0)
        _, cache = forward_batch(x, spec, params, keep_cache=True)
        if np.min(np.abs(cache.pre_gcn)) > kink_margin:
            return spec, params, (x, y), attempt
    raise RuntimeError(f"could not sample a kink-free problem in {max_tries} tries")


def gradient_check(seed: int, dims: ModelDims | None = None, tol: float = 1e-4, window: int = 12,
                   batch_size: int = 8, h: float = 1e-5) -> GradCheckReport:
    if dims is None:
        dims = ModelDims(4, 1, 8, 16)
    spec, params, batch, resamples = random_problem(seed, dims, window, batch_size)
    _, analytic = backward(batch, spec, params)
    numeric = finite_diff_grad(batch, spec, params, h)
    err = max_relative_error(analytic, numeric)
    return GradCheckReport(seed, err, tol, err < tol, params.num_scalars(), resamples)
