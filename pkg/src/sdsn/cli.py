"""``sdsn`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data or model error,
4 diverged training, 5 gradient check above threshold.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import load_config
from .core import GradVariant, one_hot_encode
from .data_io import (
    infer_format,
    load_dataset,
    load_model,
    save_features,
    save_labels,
    save_model,
    synth_blobs,
)
from .errors import ConfigError, DataError, DivergedTraining, SDSNError, SingularSystem
from .gradcheck import THRESHOLDS, run_gradcheck
from .metrics import accuracy, column_sparseness, confusion, time_inference
from .trainer import predict, stack_forward, train_stack

log = logging.getLogger("sdsn")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_GRADCHECK = 0, 2, 3, 4, 5
SCHEMA_VERSION = 1
HSM_PROTOCOL = "mean per-column Hoyer sparseness of each hidden layer over the evaluated set"

HP_FLAGS = [
    ("--epsilon", float), ("--alpha", float), ("--beta", float), ("--groups", int),
    ("--epochs", int), ("--layers", int), ("--hidden", int), ("--activation", str),
    ("--variant", str), ("--penalty", str),
]


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(cfg, *keys):
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join(missing))


def _config(args, keys):
    overrides = {k: getattr(args, k, None) for k in keys}
    return load_config(getattr(args, "config", None), overrides)


def _hsm_per_layer(hiddens):
    return [float(column_sparseness(H).mean()) for H in hiddens]


def cmd_train(args):
    cfg = _config(args, ["data", "labels", "model", "out", "format", "seed", "classes"]
                  + [f[0][2:] for f in HP_FLAGS])
    _require(cfg, "data", "labels")
    hp = cfg.hyperparams()
    bundle = load_dataset(cfg.data, cfg.labels, cfg.format, cfg.classes)
    out = _out_dir(cfg)
    model_path = Path(cfg.model) if cfg.model else out / "model.sdsn"

    T = one_hot_encode(bundle.labels, bundle.class_count).onehot
    model, report = train_stack(bundle.features, T, hp)
    save_model(model_path, model)

    lines = [f"model: {model_path}", f"data: {cfg.data}", f"examples: {bundle.size}",
             f"classes: {bundle.class_count}", f"seed: {report.seed}"]
    lines += [f"{k}: {v}" for k, v in hp.as_dict().items() if k != "seed"]
    for k, r in enumerate(report.layers, start=1):
        lines += [
            f"layer.{k}.input_dim: {r.input_dim}",
            f"layer.{k}.initial_objective: {r.initial_objective!r}",
            f"layer.{k}.objectives: " + ", ".join(repr(v) for v in r.objectives),
            f"layer.{k}.train_accuracy: {r.train_accuracy!r}",
            f"layer.{k}.seconds: {r.seconds:.6f}",
        ]
    lines.append(f"train_accuracy: {report.layers[-1].train_accuracy!r}")
    (out / "train_report.txt").write_text("\n".join(lines) + "\n")

    metrics = {"schema_version": SCHEMA_VERSION, "command": "train", "model": str(model_path),
               "data": {"features": cfg.data, "labels": cfg.labels, "examples": bundle.size,
                        "classes": bundle.class_count, "dim": bundle.features.shape[0]},
               "train_accuracy": report.layers[-1].train_accuracy}
    metrics.update(report.as_dict())
    _write_json(out / "metrics.json", metrics)
    print("\n".join(lines))
    return EXIT_OK


def _load_model_and_data(cfg):
    _require(cfg, "model", "data")
    model = load_model(cfg.model)
    if cfg.labels:
        bundle = load_dataset(cfg.data, cfg.labels, cfg.format, model.class_count)
        return model, bundle.features, bundle.labels
    from .data_io import load_features
    return model, load_features(cfg.data, cfg.format), None


def cmd_eval(args):
    cfg = _config(args, ["model", "data", "labels", "out", "format"])
    _require(cfg, "labels")
    model, X, y = _load_model_and_data(cfg)
    hiddens, outputs = stack_forward(model, X)
    pred = np.argmax(outputs[-1], axis=0)
    acc = accuracy(pred, y)
    cm = confusion(pred, y, model.class_count)
    hsm = _hsm_per_layer(hiddens)
    out = _out_dir(cfg)
    with open(out / "confusion.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred"] + list(range(model.class_count)))
        for c, row in enumerate(cm.counts):
            w.writerow([c] + row.tolist())
    layer_acc = [accuracy(np.argmax(Y, axis=0), y) for Y in outputs]
    _write_json(out / "eval_metrics.json", {
        "schema_version": SCHEMA_VERSION, "command": "eval", "model": cfg.model,
        "data": cfg.data, "examples": int(y.size), "accuracy": acc,
        "layer_accuracy": layer_acc, "hidden_sparseness": hsm, "hsm_protocol": HSM_PROTOCOL,
    })
    print(f"accuracy: {acc!r}")
    for k, (a, s) in enumerate(zip(layer_acc, hsm), start=1):
        print(f"layer.{k}.accuracy: {a!r}")
        print(f"layer.{k}.mean_hsm: {s!r}")
    return EXIT_OK


def cmd_sparseness(args):
    cfg = _config(args, ["model", "data", "labels", "out", "format"])
    model, X, _ = _load_model_and_data(cfg)
    hiddens, _ = stack_forward(model, X)
    hsm = _hsm_per_layer(hiddens)
    out = _out_dir(cfg)
    with open(out / "sparseness.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "hidden_units", "mean_hsm"])
        for k, (H, s) in enumerate(zip(hiddens, hsm), start=1):
            w.writerow([k, H.shape[0], repr(s)])
    print(f"# {HSM_PROTOCOL}")
    print(f"{'layer':>5}  {'hidden':>6}  mean_hsm")
    for k, (H, s) in enumerate(zip(hiddens, hsm), start=1):
        print(f"{k:>5}  {H.shape[0]:>6}  {s:.6f}")
    return EXIT_OK


def cmd_synth(args):
    cfg = _config(args, ["classes", "dim", "per_class", "separation", "noise_sd", "seed",
                         "out", "format"])
    C = cfg.classes or 5
    bundle = synth_blobs(C, cfg.dim, cfg.per_class, cfg.separation, cfg.noise_sd, cfg.seed)
    out = _out_dir(cfg)
    fmt = infer_format("", cfg.format)
    feat = out / ("features.bin" if fmt == "bin" else "features.csv")
    save_features(feat, bundle.features, fmt)
    save_labels(out / "labels.txt", bundle.labels)
    print(f"features: {feat}")
    print(f"labels: {out / 'labels.txt'}")
    print(f"provenance: {bundle.provenance}")
    return EXIT_OK


def cmd_bench(args):
    cfg = _config(args, ["model", "data", "format", "repeats"])
    model, X, _ = _load_model_and_data(cfg)
    ms = time_inference(model, X, repeats=cfg.repeats, single_thread=not args.parallel)
    dims = ", ".join(f"({m.input_dim}x{m.hidden}x{m.classes})" for m in model.modules)
    print(f"per_example_ms: {ms:.6f}")
    print(f"examples: {X.shape[1]}")
    print(f"repeats: {cfg.repeats}")
    print(f"layers: {model.layers}")
    print(f"dims: {dims}")
    print(f"threads: {'default' if args.parallel else 1}")
    return EXIT_OK


def cmd_gradcheck(args):
    variant = GradVariant(args.variant.upper())
    worst = None
    for i in range(args.instances):
        rep = run_gradcheck(D=args.dim, L=args.hidden, N=args.examples, C=args.classes,
                            groups=args.groups, beta=args.beta, variant=variant,
                            activation=args.activation, seed=args.seed + i, step=args.step,
                            corrupt=args.corrupt_gradient)
        if worst is None or rep.max_rel_error > worst.max_rel_error:
            worst = rep
    threshold = THRESHOLDS[variant]
    print("\n".join(worst.lines()))
    print(f"instances: {args.instances}")
    print(f"threshold: {threshold:g}")
    ok = worst.passed(threshold)
    print(f"result: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_GRADCHECK


def build_parser():
    p = argparse.ArgumentParser(prog="sdsn", description="Sparse deep stacking networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *flags):
        sp.add_argument("--config", metavar="PATH")
        for flag in flags:
            if flag == "--seed":
                sp.add_argument("--seed", type=int)
            elif flag == "--format":
                sp.add_argument("--format", choices=["csv", "bin"])
            else:
                sp.add_argument(flag, metavar="PATH")

    sp = sub.add_parser("train", help="train a stack on features + labels")
    common(sp, "--data", "--labels", "--model", "--out", "--format", "--seed")
    sp.add_argument("--classes", type=int)
    for flag, typ in HP_FLAGS:
        sp.add_argument(flag, type=typ)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="accuracy, confusion matrix and hidden sparseness")
    common(sp, "--model", "--data", "--labels", "--out", "--format")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sparseness", help="per-layer mean Hoyer sparseness")
    common(sp, "--model", "--data", "--labels", "--out", "--format")
    sp.set_defaults(func=cmd_sparseness)

    sp = sub.add_parser("synth", help="write a synthetic Gaussian-blob dataset")
    common(sp, "--out", "--format", "--seed")
    sp.add_argument("--classes", type=int)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--per-class", dest="per_class", type=int)
    sp.add_argument("--separation", type=float)
    sp.add_argument("--noise-sd", dest="noise_sd", type=float)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bench", help="median per-example inference time")
    common(sp, "--model", "--data", "--format")
    sp.add_argument("--repeats", type=int)
    sp.add_argument("--parallel", action="store_true",
                    help="let BLAS use all threads (throughput mode)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    sp.add_argument("--dim", type=int, default=6)
    sp.add_argument("--hidden", type=int, default=8)
    sp.add_argument("--examples", type=int, default=10)
    sp.add_argument("--classes", type=int, default=3)
    sp.add_argument("--groups", type=int, default=4)
    sp.add_argument("--beta", type=float, default=0.01)
    sp.add_argument("--variant", default="F1", choices=["F1", "F2", "f1", "f2"])
    sp.add_argument("--activation", default="sigmoid", choices=["sigmoid", "relu"])
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--step", type=float, default=1e-5)
    sp.add_argument("--instances", type=int, default=1)
    sp.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("SDSN_THREADS")
    try:
        limit = threadpool_limits(limits=int(threads)) if threads else nullcontext()
    except ValueError:
        print(f"error: SDSN_THREADS must be an integer, got {threads!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with limit:
            return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedTraining as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, SingularSystem, OSError) as exc:
        msg = f"{exc.strerror}: {exc.filename}" if isinstance(exc, OSError) and exc.strerror else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_DATA
    except SDSNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
