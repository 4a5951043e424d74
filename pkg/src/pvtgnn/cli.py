"""Command-line interface: ``pvtgnn {generate,train,predict,detect,eval,gradcheck}``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error. Options may
also come from a flat ``key=value`` file given with ``--config``; explicit
flags win over the file, and ``TGNN_SEED`` is the seed of last resort.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import anomaly
from .data import (
    GeneratorConfig,
    generate_dataset,
    load_checkpoint,
    parse_csv,
    read_labels,
    save_checkpoint,
    write_csv,
    write_labels,
)
from .errors import PVTGNNError
from .graph import DEFAULT_EDGES, DEFAULT_NODES, build_parameter_graph, parse_edges
from .gradients import gradient_check
from .model import ModelDims
from .pipeline import evaluation, predict_records
from .training import TrainConfig, train

log = logging.getLogger("pvtgnn")


class UsageError(Exception):
    pass


def read_config(path) -> dict[str, str]:
    """Parse a flat ``key=value`` file; ``#`` starts a comment, keys accept ``-`` or ``_``."""
    out = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _resolve(args, cfg: dict, key: str, cast=str, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError:
            raise UsageError(f"config value {key}={cfg[key]!r} is not a valid {cast.__name__}") from None
    if key == "seed" and os.environ.get("TGNN_SEED"):
        try:
            return int(os.environ["TGNN_SEED"])
        except ValueError:
            raise UsageError(f"TGNN_SEED={os.environ['TGNN_SEED']!r} is not an integer") from None
    return default


def _dump_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def cmd_generate(args, cfg) -> int:
    gen = GeneratorConfig(
        days=_resolve(args, cfg, "days", int, 10),
        period_s=_resolve(args, cfg, "period", int, 60),
        seed=_resolve(args, cfg, "seed", int, 0),
        anomaly_fraction=_resolve(args, cfg, "anomaly_frac", float, 0.0),
        drop_range=(_resolve(args, cfg, "drop_low", float, 0.3), _resolve(args, cfg, "drop_high", float, 0.7)),
    )
    out = _resolve(args, cfg, "output")
    if out is None:
        raise UsageError("generate needs -o/--output")
    records, labels = generate_dataset(gen)
    write_csv(records, out)
    labels_path = _resolve(args, cfg, "labels")
    if labels_path:
        write_labels(records, labels, labels_path)
    print(f"wrote {len(records)} records ({sum(labels)} injected anomalies) to {out}")
    return 0


def _graph_from(cfg):
    nodes = [n.strip() for n in cfg["nodes"].split(",")] if "nodes" in cfg else list(DEFAULT_NODES)
    if "edges" in cfg:
        edges = parse_edges(cfg["edges"], nodes)
    elif "nodes" in cfg:
        names = list(DEFAULT_NODES)
        edges = [(nodes.index(names[s]), nodes.index(names[d])) for s, d in DEFAULT_EDGES
                 if names[s] in nodes and names[d] in nodes]
    else:
        edges = list(DEFAULT_EDGES)
    return build_parameter_graph(nodes, edges, 1)


def cmd_train(args, cfg) -> int:
    data = _resolve(args, cfg, "data")
    out = _resolve(args, cfg, "output")
    if data is None or out is None:
        raise UsageError("train needs --data and -o/--output")
    config = TrainConfig(
        lr=_resolve(args, cfg, "lr", float, 0.01),
        epochs=_resolve(args, cfg, "epochs", int, 100),
        batch_size=_resolve(args, cfg, "batch", int, 32),
        window=_resolve(args, cfg, "window", int, 12),
        horizon=_resolve(args, cfg, "horizon", int, 0),
        split_ratio=_resolve(args, cfg, "split_ratio", float, 0.8),
        split=_resolve(args, cfg, "split", str, "random"),
        seed=_resolve(args, cfg, "seed", int, 0),
        gcn_hidden=_resolve(args, cfg, "gcn_hidden", int, 8),
        hidden=_resolve(args, cfg, "hidden", int, 16),
    )
    spec = _graph_from(cfg)
    records = parse_csv(data)
    verbose = args.verbose

    def progress(stats):
        if verbose:
            print(f"epoch {stats.epoch:4d}  train_mse {stats.train_mse:.6g}  test_mae {stats.test_mae:.6g}",
                  file=sys.stderr)

    result = train(records, spec, config, progress=progress)
    save_checkpoint(result.params, result.scaler, spec, config, out)
    metrics_path = _resolve(args, cfg, "metrics")
    if metrics_path:
        _dump_json({
            "config": config.to_dict(),
            "graph": spec.to_dict(),
            "n_records": len(records),
            "n_train_windows": len(result.train_index),
            "n_test_windows": len(result.test_index),
            "final_train_mse": result.history[-1].train_mse,
            "final_test_mae": result.final_test_mae,
            "history": [h.to_dict() for h in result.history],
        }, metrics_path)
    print(f"final test MAE (scaled) {result.final_test_mae:.6f}")
    return 0


def _load_pair(args, cfg):
    model = _resolve(args, cfg, "model")
    data = _resolve(args, cfg, "data")
    if model is None or data is None:
        raise UsageError(f"{args.command} needs --model and --data")
    ckpt = load_checkpoint(model)
    records = parse_csv(data)
    return ckpt, records


def cmd_predict(args, cfg) -> int:
    ckpt, records = _load_pair(args, cfg)
    out = _resolve(args, cfg, "output")
    if out is None:
        raise UsageError("predict needs -o/--output")
    p = predict_records(ckpt, records)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual_scaled", "predicted_scaled", "actual_w", "predicted_w"])
        for row in zip(p.timestamps, p.actual, p.predicted, p.actual_w, p.predicted_w):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    print(f"wrote {len(p.timestamps)} predictions to {out}")
    return 0


def cmd_detect(args, cfg) -> int:
    ckpt, records = _load_pair(args, cfg)
    out = _resolve(args, cfg, "output")
    if out is None:
        raise UsageError("detect needs -o/--output")
    p = predict_records(ckpt, records)
    rep = anomaly.detect(p.actual, p.predicted, p.timestamps)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual", "predicted", "e", "z", "flag"])
        for k, ts in enumerate(p.timestamps):
            z = repr(float(rep.zscores[k])) if rep.zscores.size else ""
            w.writerow([ts, repr(float(p.actual[k])), repr(float(p.predicted[k])),
                        repr(float(rep.residuals[k])), z, int(rep.flags[k])])
    report_path = _resolve(args, cfg, "report")
    if report_path:
        _dump_json(rep.summary(), report_path)
    if rep.diagnostic:
        print(rep.diagnostic, file=sys.stderr)
    print(f"flagged {int(rep.flags.sum())} of {rep.n} points ({100 * rep.anomaly_fraction:.2f}%)")
    return 0


def cmd_eval(args, cfg) -> int:
    ckpt, records = _load_pair(args, cfg)
    out = _resolve(args, cfg, "output")
    labels_path = _resolve(args, cfg, "labels")
    labels = read_labels(labels_path) if labels_path else None
    p = predict_records(ckpt, records)
    doc = evaluation(p, labels)
    if out:
        _dump_json(doc, out)
    print(json.dumps(doc, indent=2))
    return 0


def cmd_gradcheck(args, cfg) -> int:
    seeds = args.seed or [1, 2, 3]
    tol = args.tol
    dims = ModelDims(4, 1, args.gcn_hidden, args.hidden)
    ok = True
    for seed in seeds:
        rep = gradient_check(seed, dims, tol, window=args.window, batch_size=args.batch)
        ok &= rep.passed
        print(f"seed {seed}: max_rel_err {rep.max_rel_err:.3e} ({rep.num_params} params) "
              f"{'pass' if rep.passed else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvtgnn", description="Temporal graph network for PV telemetry")
    parser.add_argument("--config", help="flat key=value file with default option values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic telemetry (and truth labels)")
    g.add_argument("--days", type=int)
    g.add_argument("--period", type=int, help="sampling period in seconds (default 60)")
    g.add_argument("--anomaly-frac", dest="anomaly_frac", type=float)
    g.add_argument("--drop-low", dest="drop_low", type=float)
    g.add_argument("--drop-high", dest="drop_high", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output")
    g.add_argument("--labels")

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--data")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--window", type=int)
    t.add_argument("--horizon", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--split", choices=["random", "chrono"])
    t.add_argument("--split-ratio", dest="split_ratio", type=float)
    t.add_argument("--gcn-hidden", dest="gcn_hidden", type=int)
    t.add_argument("--hidden", type=int)
    t.add_argument("-o", "--output")
    t.add_argument("--metrics")

    for name, helptext in (("predict", "write scaled and physical predictions"),
                           ("detect", "flag anomalous residuals"),
                           ("eval", "compute MAE, MPE and detection scores")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model")
        p.add_argument("--data")
        p.add_argument("-o", "--output")
        if name == "detect":
            p.add_argument("--report")
        if name == "eval":
            p.add_argument("--labels")

    c = sub.add_parser("gradcheck", help="compare backprop with finite differences")
    c.add_argument("--seed", type=int, action="append", help="repeatable; default 1, 2, 3")
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--window", type=int, default=12)
    c.add_argument("--batch", type=int, default=8)
    c.add_argument("--gcn-hidden", dest="gcn_hidden", type=int, default=8)
    c.add_argument("--hidden", type=int, default=16)
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = read_config(args.config) if args.config else {}
        return COMMANDS[args.command](args, cfg)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"pvtgnn {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (PVTGNNError, OSError, KeyError) as e:
        print(f"pvtgnn {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
