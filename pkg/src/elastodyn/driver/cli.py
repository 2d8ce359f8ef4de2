"""Command-line entry point: ``elastodyn <subcommand> [--key value ...]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from ..precond.solvers import SOLVERS
from .benchmarks import (LINEAR_BENCH_COLUMNS, linear_bench, run_benchmark, run_sweep,
                         tensile_defaults)
from .config import (BENCHMARKS, BLOCK_COMPRESSION, TENSILE_TEST, BenchmarkConfig, parse_value,
                     read_ini)
from .output import SWEEP_STAT_COLUMNS


def _add_config_flags(p: argparse.ArgumentParser, defaults: BenchmarkConfig | None = None):
    p.add_argument("--config", help="INI file with [run] and optional [sweep] sections")
    for f in fields(BenchmarkConfig):
        if f.name == "benchmark":
            continue
        flag = "--" + f.name.replace("_", "-")
        help_ = f"default: {getattr(defaults, f.name)}" if defaults else "benchmark default"
        p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper(), help=help_)
    p.add_argument("--strict", action="store_true", help="exit nonzero if any run is NC")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastodyn",
                                     description="Hyper-elastodynamics benchmarks and solver studies")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in BENCHMARKS:
        defaults = tensile_defaults() if name == TENSILE_TEST else BenchmarkConfig(benchmark=name)
        _add_config_flags(sub.add_parser(name, help=f"run the {name} benchmark"), defaults)
    sw = sub.add_parser("sweep", help="cartesian parameter sweep, one CSV row per cell")
    sw.add_argument("--benchmark", choices=BENCHMARKS, default=None)
    sw.add_argument("--set", dest="sweep", action="append", default=[], metavar="KEY=V1,V2",
                    help="sweep values for one key (repeatable)")
    sw.add_argument("--output", help="CSV path (default: <output_dir>/sweep.csv or stdout)")
    _add_config_flags(sw)
    lb = sub.add_parser("linear-bench", help="solve one Newton system with several solvers")
    lb.add_argument("--benchmark", choices=BENCHMARKS, default=None)
    lb.add_argument("--solvers", default=",".join(SOLVERS))
    lb.add_argument("--output", help="CSV path")
    lb.add_argument("--matrix-market", help="directory for A, B, C, D in Matrix Market format")
    _add_config_flags(lb)
    return parser


def resolve_config(args, benchmark: str | None) -> tuple[BenchmarkConfig, dict]:
    """Benchmark defaults, then the INI file, then command-line flags.

    The subcommand or ``--benchmark`` wins over the file's ``benchmark`` key.
    """
    values, sweep = read_ini(args.config) if args.config else ({}, {})
    bench = benchmark or values.pop("benchmark", None) or BLOCK_COMPRESSION
    values.pop("benchmark", None)
    for f in fields(BenchmarkConfig):
        v = getattr(args, f.name, None)
        if v is not None and f.name != "benchmark":
            values[f.name] = parse_value(f.name, v)
    if bench == TENSILE_TEST:
        return tensile_defaults(**values), sweep
    return BenchmarkConfig(benchmark=bench, **values), sweep


def _parse_sweep(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, _, values = item.partition("=")
        key = key.strip().replace("-", "_")
        out[key] = [parse_value(key, v) for v in values.split(",") if v.strip()]
    return out


def _print_rows(rows, columns):
    print(",".join(columns))
    for r in rows:
        print(",".join(str(r.get(c, "")) for c in columns))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cmd = args.command

    if cmd in BENCHMARKS:
        cfg, _ = resolve_config(args, cmd)
        res = run_benchmark(cfg)
        summary = res.summary()
        summary["message"] = res.message
        summary["files"] = [str(f) for f in res.files]
        print(json.dumps(summary, indent=2))
        return 1 if args.strict and not res.ok else 0

    if cmd == "sweep":
        cfg, sweep = resolve_config(args, args.benchmark)
        sweep.update(_parse_sweep(args.sweep))
        output = args.output
        if output is None and cfg.output_dir:
            output = str(Path(cfg.output_dir) / "sweep.csv")
        rows = run_sweep(cfg, sweep, output)
        if output is None:
            _print_rows(rows, list(sweep) + SWEEP_STAT_COLUMNS)
        else:
            print(f"{len(rows)} rows written to {output}")
        nc = sum(r["status"] != "ok" for r in rows)
        return 1 if args.strict and nc else 0

    if cmd == "linear-bench":
        cfg, _ = resolve_config(args, args.benchmark)
        solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
        rows = linear_bench(cfg, solvers, output=args.output, matrix_market=args.matrix_market)
        _print_rows(rows, LINEAR_BENCH_COLUMNS)
        return 1 if args.strict and not all(r["converged"] for r in rows) else 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
