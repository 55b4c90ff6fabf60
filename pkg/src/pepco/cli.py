"""Command-line entry point.

Commands: train, infer, attribute, compare, sweep-lambda, gen-synth.
Exit codes: 0 success, 1 usage/configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import data as pdata
from . import encoders as penc
from .attribution import attribute_dataset, read_profiles_csv, write_profiles_csv
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .data import DataError
from .metrics import MetricError, compare_models
from .model_io import load_model, save_model
from .training import DivergenceError, evaluate, infer, train

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class UsageError(ValueError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a key = value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--out-dir", help="directory for output artifacts")
    common.add_argument("--seed", type=int, help="override the run seed")

    parser = argparse.ArgumentParser(
        prog="pepco",
        description="Co-modeling peptide sequences and bead graphs: training, "
                    "decoupled inference, attribution, and attribution comparison.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common],
                   help="train a co-model and write checkpoint/curve/metrics")

    p_infer = sub.add_parser("infer", parents=[common],
                             help="sequence-only predictions from a checkpoint")
    p_infer.add_argument("--checkpoint", required=True)
    p_infer.add_argument("--fasta", required=True)
    p_infer.add_argument("--out", help="predictions CSV (default stdout)")
    p_infer.add_argument("--assert-seq-only", action="store_true",
                         help="fail if graph construction or encoding is touched")

    p_attr = sub.add_parser("attribute", parents=[common],
                            help="per-residue attribution profiles")
    p_attr.add_argument("--checkpoint", required=True)
    p_attr.add_argument("--dataset", required=True,
                        help="CSV (sequence,label) or FASTA input")
    p_attr.add_argument("--route", choices=("seq", "graph"), required=True)
    p_attr.add_argument("--m", type=int, default=300, help="path steps")
    p_attr.add_argument("--out", help="profiles CSV (default stdout)")

    p_cmp = sub.add_parser("compare", parents=[common],
                           help="similarity report between two profile CSVs")
    p_cmp.add_argument("--profiles-a", required=True)
    p_cmp.add_argument("--profiles-b", required=True)
    p_cmp.add_argument("--out", help="report CSV (default stdout)")

    p_sweep = sub.add_parser("sweep-lambda", parents=[common],
                             help="train once per lambda on a shared seed")
    p_sweep.add_argument("--grid", required=True,
                         help="comma-separated lambda values, e.g. 0,1e-5,1e-4")
    p_sweep.add_argument("--out", help="lambda,val_metric CSV (default out_dir)")

    p_gen = sub.add_parser("gen-synth", parents=[common],
                           help="synthetic aromatic-fraction regression dataset")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--max-len", type=int, default=10)
    p_gen.add_argument("--out", required=True)

    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    apply_overrides(cfg, args.overrides)
    if args.out_dir:
        cfg.set("out_dir", args.out_dir)
    if args.seed is not None:
        cfg.set("seed", args.seed)
    return cfg


def _load_split(cfg: RunConfig):
    records = pdata.parse_dataset(cfg.require("dataset"), cfg["task"],
                                  max_len=cfg["max_len"])
    return pdata.split_dataset(records, cfg.ratios(), cfg["seed"])


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    split = _load_split(cfg)
    out = _out_dir(cfg)
    cfg.write(out / "config.txt")
    model, curve = train(split, cfg.train_config())
    curve.write_csv(out / "loss_curve.csv")
    save_model(out / "checkpoint.pcn", model)
    metrics = evaluate(model, split.test, cfg["task"])
    with open(out / "metrics.txt", "w", encoding="utf-8", newline="\n") as fh:
        for key in ("mae", "mse", "r2", "accuracy"):
            if key in metrics:
                fh.write(f"{key}={metrics[key]:.6f}\n")
    print(f"wrote {out / 'checkpoint.pcn'}, {out / 'loss_curve.csv'}, "
          f"{out / 'metrics.txt'}")
    return 0


def cmd_infer(args) -> int:
    model = load_model(args.checkpoint)
    if model.fusion.kind != "repcon":
        raise UsageError(
            f"checkpoint holds a {model.fusion.kind!r} model, which needs the "
            f"graph route at inference; sequence-only inference requires a "
            f"repcon checkpoint"
        )
    records = pdata.parse_fasta(args.fasta, max_len=model.seq.max_len)
    if args.assert_seq_only:
        pdata.reset_graph_build_counter()
        penc.reset_graph_encode_counter()
    lines = ["id,prediction"]
    for rec in records:
        pred = infer(pdata.encode_sequence(rec), model)
        if model.task == "regression":
            lines.append(f"{rec.id},{float(pred):.6f}")
        else:
            lines.append(f"{rec.id},{int(np.argmax(pred))}")
    if args.assert_seq_only:
        builds = pdata.GRAPH_BUILD_CALLS
        encodes = penc.GRAPH_ENCODE_CALLS
        if builds or encodes:
            raise RuntimeError(
                f"sequence-only contract violated: graph builds={builds}, "
                f"graph encodes={encodes}"
            )
        print("seq-only assertion held: graph builds=0, graph encodes=0",
              file=sys.stderr)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _read_unlabeled(path: str, max_len: int):
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    if text.lstrip().startswith(">"):
        return pdata.parse_fasta(path, max_len=max_len)
    records = pdata.parse_dataset(path, "regression", max_len=max_len)
    return records


def cmd_attribute(args) -> int:
    model = load_model(args.checkpoint)
    if args.m < 1:
        raise UsageError(f"--m must be at least 1, got {args.m}")
    if args.m < 10:
        print(f"warning: m={args.m} path steps approximate the integral "
              f"coarsely; expect a larger completeness gap", file=sys.stderr)
    records = _read_unlabeled(args.dataset, model.seq.max_len)
    profiles = attribute_dataset(model, args.route, records, m=args.m)
    if args.out:
        write_profiles_csv(args.out, profiles)
        print(f"wrote {len(profiles)} profiles to {args.out}")
    else:
        sys.stdout.write("id,position,residue,score\n")
        for prof in profiles:
            for pos, (letter, score) in enumerate(zip(prof.residues, prof.scores)):
                sys.stdout.write(f"{prof.peptide_id},{pos},{letter},{score:.6f}\n")
    return 0


def cmd_compare(args) -> int:
    profiles_a = read_profiles_csv(args.profiles_a)
    profiles_b = read_profiles_csv(args.profiles_b)
    report = compare_models(profiles_a, profiles_b)
    if args.out:
        report.write_csv(args.out)
        print(f"wrote similarity report to {args.out}")
    else:
        sys.stdout.write("metric,statistic,value\n")
        for metric, stat, value in report.rows():
            sys.stdout.write(f"{metric},{stat},{value:.6f}\n")
    return 0


def cmd_sweep_lambda(args) -> int:
    cfg = _resolve_config(args)
    grid_text = [g for g in args.grid.split(",") if g.strip()]
    if not grid_text:
        raise UsageError("--grid is empty")
    try:
        grid = sorted(float(g) for g in grid_text)
    except ValueError as e:
        raise UsageError(f"bad --grid value: {e}")
    if any(g < 0 for g in grid):
        raise UsageError("lambda values must be non-negative")
    split = _load_split(cfg)
    out = _out_dir(cfg)
    cfg.write(out / "config.txt")
    rows = []
    for lam in grid:
        run_cfg = cfg.train_config()
        run_cfg.lambda_ = lam
        _, curve = train(split, run_cfg)
        metrics = [r.val_metric for r in curve.rows]
        best = min(metrics) if cfg["task"] == "regression" else max(metrics)
        rows.append((lam, best))
        print(f"lambda={lam:g}: best val {curve.val_metric_name}={best:.6f}")
    out_path = Path(args.out) if args.out else out / "lambda_sweep.csv"
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("lambda,val_metric\n")
        for lam, metric in rows:
            fh.write(f"{lam:.6g},{metric:.6f}\n")
    print(f"wrote {out_path}")
    return 0


def cmd_gen_synth(args) -> int:
    cfg = _resolve_config(args)
    records = pdata.generate_synthetic(args.n, args.max_len, cfg["seed"])
    pdata.write_dataset_csv(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "infer": cmd_infer,
    "attribute": cmd_attribute,
    "compare": cmd_compare,
    "sweep-lambda": cmd_sweep_lambda,
    "gen-synth": cmd_gen_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse prints its own message; -h/--help exits 0
        return 0 if e.code == 0 else USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except (DataError, MetricError, DivergenceError, ValueError, OSError,
            RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return RUNTIME_EXIT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
