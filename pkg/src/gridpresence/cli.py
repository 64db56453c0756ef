"""Command-line entry point: generate, validate, baseline.

Exit codes are stable contracts: 0 success, 1 audit failure, 2 invalid
config, 3 I/O or dataset-structure failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import pandas as pd

from . import fedbaseline, pipeline, validation
from .config import ConfigError, GeneratorConfig, load_config
from .dataset_io import open_dataset

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _load_config_arg(path: str | None, seed: int | None) -> GeneratorConfig:
    config = load_config(path) if path else GeneratorConfig()
    if seed is not None:
        import dataclasses

        config = dataclasses.replace(config, seed_base=seed)
    return config


def cmd_generate(args) -> int:
    try:
        config = _load_config_arg(args.config, args.seed)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        digests = pipeline.generate_dataset(config, args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name in sorted(digests):
        print(f"{digests[name]}  {name}")
    print(f"wrote {len(digests)} files to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    problems = pipeline.verify_digests(args.in_dir)
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_IO
    try:
        dataset = open_dataset(args.in_dir)
    except (FileNotFoundError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    report = validation.run_validation(dataset)
    print(report.to_text(), end="")
    out_dir = args.out or args.in_dir
    os.makedirs(out_dir, exist_ok=True)
    with open(
        os.path.join(out_dir, "validation_report.json"), "w", encoding="utf-8"
    ) as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(
        os.path.join(out_dir, "shift_quantiles.csv"), "w", encoding="utf-8",
        newline="\n",
    ) as fh:
        fh.write(report.shift_quantiles_csv())
    return EXIT_OK if report.passed else EXIT_AUDIT


def cmd_baseline(args) -> int:
    try:
        dataset = open_dataset(args.in_dir)
        clients = fedbaseline.build_client_datasets(dataset)
    except (FileNotFoundError, ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    params = dataset.config.fed
    train_seed = args.train_seed if args.train_seed is not None else params.train_seed
    model = fedbaseline.fedavg_train(clients["train"], params, train_seed)
    table, macro = fedbaseline.evaluate_clients(
        model, clients["test"], params.threshold
    )
    out_dir = args.out or args.in_dir
    os.makedirs(out_dir, exist_ok=True)
    client_path = os.path.join(out_dir, "fed_client_metrics.csv")
    macro_path = os.path.join(out_dir, "fed_macro_metrics.csv")
    table.to_csv(client_path, index=False, float_format="%.6g", lineterminator="\n")
    macro_row = pd.DataFrame(
        [
            {
                "Precision": macro["precision"],
                "Recall": macro["recall"],
                "F1": macro["f1"],
                "Accuracy": macro["accuracy"],
            }
        ]
    )
    macro_row.to_csv(macro_path, index=False, float_format="%.6g", lineterminator="\n")
    print("client metrics written to", client_path)
    print(
        "macro: precision={precision:.4f} recall={recall:.4f} "
        "f1={f1:.4f} accuracy={accuracy:.4f}".format(**macro)
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridpresence",
        description="Benchmark dataset generator for presence-only passive "
        "reconnaissance in tiered smart-grid communications.",
    )
    parser.add_argument("--verbose", action="store_true", help="chatty logging")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a dataset directory")
    gen.add_argument("--config", help="config JSON path (defaults applied if omitted)")
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--seed", type=int, help="override seed_base")
    gen.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count(),
        help="cap on concurrent split workers; output is identical at any value",
    )
    gen.set_defaults(func=cmd_generate)

    val = sub.add_parser("validate", help="audit a generated dataset")
    val.add_argument("--in", dest="in_dir", required=True, help="dataset directory")
    val.add_argument(
        "--out", help="directory for the report and quantile CSV (default: dataset dir)"
    )
    val.set_defaults(func=cmd_validate)

    base = sub.add_parser("baseline", help="train and evaluate the Fed-LR detector")
    base.add_argument("--in", dest="in_dir", required=True, help="dataset directory")
    base.add_argument("--out", help="directory for metric CSVs (default: dataset dir)")
    base.add_argument("--train-seed", type=int, help="override the training stream seed")
    base.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    import logging

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
