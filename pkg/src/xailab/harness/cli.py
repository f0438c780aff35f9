"""Command-line entry points.

Subcommands: gen-data, train, explain, disagree, consistency, faithfulness,
report. Failures exit nonzero with a machine-readable error line on stderr:
a JSON object carrying the error class and message.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, XaiLabError
from ..netcore import (
    FeatureMatrix,
    TrainConfig,
    balanced_accuracy,
    load_dataset,
    load_model,
    mlp_init,
    save_dataset,
    save_model,
    train,
)
from ..synthdata import SynthSpec, normalize_minmax, save_mask, synth_gauss, synth_logistic
from .config import KNOWN_METHODS, load_config
from .report import emit_report, validate_report
from .runs import (
    DataBundle,
    explain_instance,
    run_consistency,
    run_disagreement,
    run_faithfulness,
)


def _add_gen_data(sub):
    p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    p.add_argument("--kind", choices=["synthgauss", "logistic"], required=True)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--mask-out", help="ground-truth mask sidecar (JSON)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true", help="min-max normalize columns")
    p.add_argument("--n-clusters", type=int, default=5)
    p.add_argument("--points-per-cluster", type=int, default=1000)
    p.add_argument("--n-features", type=int, default=20)
    p.add_argument("--relevant-per-cluster", type=int, default=4)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--d", type=int, default=20, help="logistic: feature count")
    p.add_argument("--support", default="0,1,2,3,4", help="logistic: comma-separated indices")
    p.add_argument("--n", type=int, default=2000, help="logistic: instance count")
    p.add_argument("--weight-scale", type=float, default=10.0)


def _cmd_gen_data(args) -> int:
    if args.kind == "synthgauss":
        spec = SynthSpec(
            n_clusters=args.n_clusters,
            points_per_cluster=args.points_per_cluster,
            n_features=args.n_features,
            relevant_per_cluster=args.relevant_per_cluster,
            separation=args.separation,
            noise=args.noise,
            seed=args.seed,
        )
        data, _, masks = synth_gauss(spec)
        mask = masks[0]
    else:
        support = [int(s) for s in args.support.split(",") if s != ""]
        data, mask = synth_logistic(
            d=args.d,
            support=support,
            n=args.n,
            noise=args.noise,
            seed=args.seed,
            weight_scale=args.weight_scale,
        )
    if args.normalize:
        data, _ = normalize_minmax(data)
    save_dataset(data, args.out)
    if args.mask_out:
        save_mask(mask, data.feature_names, args.mask_out)
    print(f"wrote {data.n_instances} x {data.n_features} dataset to {args.out}")
    return 0


def _add_train(sub):
    p = sub.add_parser("train", help="train an MLP on a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--hidden", default="16", help="comma-separated hidden sizes")
    p.add_argument("--head", default="auto", choices=["auto", "logistic", "softmax"])
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)


def _cmd_train(args) -> int:
    data = load_dataset(args.data)
    hidden = [int(h) for h in args.hidden.split(",") if h != ""]
    n_classes = int(data.labels.max()) + 1
    model = mlp_init([data.n_features] + hidden + [n_classes], seed=args.seed, head=args.head)
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    result = train(model, data, cfg)
    save_model(result.model, args.out)
    bac = balanced_accuracy(result.model, data)
    print(
        f"trained {args.epochs} epochs: loss {result.initial_loss:.4f} -> "
        f"{result.history[-1]:.4f}, training BAC {bac:.4f}; saved to {args.out}"
    )
    return 0


def _add_explain(sub):
    p = sub.add_parser("explain", help="explain dataset instances with one method")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV supplying instances and statistics")
    p.add_argument("--method", required=True, choices=list(KNOWN_METHODS) + ["random"])
    p.add_argument("--instances", default="0", help="comma-separated row indices")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="explanations CSV")


def _cmd_explain(args) -> int:
    from .config import parse_config

    model = load_model(args.model)
    data = load_dataset(args.data)
    cfg = parse_config({"schema_version": 1})
    bundle = DataBundle(
        name="cli",
        train=data,
        val=data,
        test=data,
        train_mean=data.data.mean(axis=0),
        train_std=data.data.std(axis=0),
        test_masks=None,
    )
    indices = [int(i) for i in args.instances.split(",") if i != ""]
    rows = []
    for idx in indices:
        e = explain_instance(
            args.method, model, data.data[idx], idx, cfg, bundle, args.seed
        )
        if e is None:
            print(f"instance {idx}: no solution", file=sys.stderr)
            continue
        rows.append([e.instance_id, e.method, e.seed] + [repr(float(v)) for v in e.scores])
    import csv as _csv

    with open(args.out, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["instance_id", "method", "seed"] + data.feature_names)
        writer.writerows(rows)
    print(f"wrote {len(rows)} explanations to {args.out}")
    return 0


def _add_config_runs(sub):
    for name, help_text in (
        ("disagree", "cross-explainer disagreement run"),
        ("consistency", "seed-variance run across training regimes"),
        ("faithfulness", "ground-truth faithfulness run"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="override the config's output_dir")


def _cmd_config_run(args, runner) -> int:
    cfg = load_config(args.config)
    report = runner(cfg)
    out = args.out or cfg.output_dir
    emit_report(report, out)
    print(f"report written to {out}")
    return 0


def _add_report(sub):
    p = sub.add_parser("report", help="validate a report directory's manifest")
    p.add_argument("--dir", required=True)


def _cmd_report(args) -> int:
    manifest = validate_report(args.dir)
    print(
        f"report ok: kind={manifest['kind']}, "
        f"{len(manifest['artifacts'])} artifacts, config {manifest['config_hash'][:12]}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="xailab",
        description="explainability laboratory for small neural classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen_data(sub)
    _add_train(sub)
    _add_explain(sub)
    _add_config_runs(sub)
    _add_report(sub)

    args = parser.parse_args(argv)
    try:
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "explain":
            return _cmd_explain(args)
        if args.command == "disagree":
            return _cmd_config_run(args, run_disagreement)
        if args.command == "consistency":
            return _cmd_config_run(args, run_consistency)
        if args.command == "faithfulness":
            return _cmd_config_run(args, run_faithfulness)
        if args.command == "report":
            return _cmd_report(args)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except XaiLabError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
