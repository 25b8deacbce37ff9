"""Command-line entry point: ``qrnn-bench run`` and ``qrnn-bench gen-mg``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import bench, data
from .errors import ConfigurationError, DataError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrnn-bench", description="QRNN optimizer comparison benchmark")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the three-strategy protocol")
    run.add_argument("--config", help="flat key = value file; flags override it")
    run.add_argument("--dataset", choices=[bench.MACKEY_GLASS, bench.CSV_SOURCE])
    run.add_argument("--csv", help="input CSV (with --dataset csv)")
    run.add_argument("--column", help="column name in the CSV")
    run.add_argument("--horizon", type=int, help="forecast steps into the future")
    run.add_argument("--methods", help="comma-separated subset of gradient,cmaes,hybrid")
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int, help="base seed; run r uses seed + r")
    run.add_argument("--out", help="output directory")
    run.add_argument("--loss", choices=["one-step", "multi-step"])
    run.add_argument("--gradient-epochs", type=int)
    run.add_argument("--cmaes-generations", type=int)
    run.add_argument("--hybrid-gradient-epochs", type=int)
    run.add_argument("--hybrid-generations", type=int)
    run.add_argument("--length", type=int, help="points kept from the start of the series")
    run.add_argument("--jobs", type=int, help="parallel worker processes")

    gen = sub.add_parser("gen-mg", help="write a Mackey-Glass series as CSV")
    gen.add_argument("--points", type=int, default=data.PROTOCOL_LENGTH)
    gen.add_argument("--dt", type=float, default=0.1)
    gen.add_argument("--stride", type=float, default=1.0)
    gen.add_argument("--x0", type=float, default=1.2)
    gen.add_argument("--column", default="x")
    gen.add_argument("--out", default="mackey_glass.csv")
    return parser


def resolve_config(args) -> bench.ExperimentConfig:
    options = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        options.update(bench.parse_config_text(text))
    for f in fields(bench.ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            options[f.name] = bench.coerce_option(f.name, value)
    return bench.ExperimentConfig(**options)


def cmd_run(args) -> int:
    try:
        config = resolve_config(args)
    except (ConfigurationError, TypeError) as exc:
        print(f"qrnn-bench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = bench.run_experiment(config)
        if not result.records:
            raise ConfigurationError("every run failed")
        paths = bench.emit_results(result)
    except (ConfigurationError, DataError) as exc:
        print(f"qrnn-bench: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for row in bench.summarize(bench.aggregate(result.records), result.failures):
        print(f"{row.method:9s} lowest mean rel-RMSE {row.lowest_mean_rel_rmse:.4f} at epoch {row.epoch}")
    for method, seed, error in result.failures:
        print(f"FAILED {method} seed {seed}: {error}", file=sys.stderr)
    print(f"results written to {paths['summary.csv'].parent}")
    return EXIT_RUNTIME if result.failures else EXIT_OK


def cmd_gen_mg(args) -> int:
    try:
        params = data.MackeyGlassParams(x0=args.x0, dt=args.dt, stride=args.stride)
        series = data.mackey_glass(params, args.points)
        data.emit_csv(series, args.out, args.column)
    except ConfigurationError as exc:
        print(f"qrnn-bench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qrnn-bench: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {args.points} points to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return cmd_run(args)
    return cmd_gen_mg(args)


if __name__ == "__main__":
    sys.exit(main())
