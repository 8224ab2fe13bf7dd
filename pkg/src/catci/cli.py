"""Command-line surface: single test, batch screening, generation, benchmark.

Exit codes: 0 success, 2 usage errors, 3 data errors (unreadable or
malformed input), 4 test-spec errors (bad or overlapping columns).
P-values are printed in natural log scale (``log_p_*``); the single-test
report adds linear ``p_*`` for readability.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from itertools import combinations
from pathlib import Path
from typing import Sequence

from . import bench as bench_mod
from . import io as io_mod
from .citest import batch_screen, ci_test
from .core import DataError, Dataset, SpecError, TestResult, TestSpec

_EXIT_DATA = 3
_EXIT_SPEC = 4

_TSV_FLOAT = "%.12g"  # fixed TSV precision; JSON carries full precision


def _resolve_column(token: str, data: Dataset) -> int:
    """Map a column name or 0-based index to a column position."""
    names = data.column_names
    if token in names:
        return names.index(token)
    try:
        idx = int(token)
    except ValueError:
        raise SpecError(f"unknown column {token!r}") from None
    if not 0 <= idx < data.n_cols:
        raise SpecError(f"column index {idx} out of range for {data.n_cols} columns")
    return idx


def _parse_cs(arg: str | None, data: Dataset) -> tuple[int, ...]:
    if not arg:
        return ()
    return tuple(_resolve_column(tok.strip(), data) for tok in arg.split(",") if tok.strip())


def _load_dataset(args: argparse.Namespace) -> Dataset:
    delimiter = "\t" if args.delimiter == "tab" else args.delimiter
    return io_mod.read_delimited(
        args.data, delimiter=delimiter, has_header=not args.no_header
    )


def _method_name(short: str) -> str:
    return {"closed": "closed_form", "closed_form": "closed_form", "ipf": "ipf"}[short]


def _result_fields(data: Dataset, spec: TestSpec, res: TestResult) -> dict:
    return {
        "x": data.columns[spec.x].name,
        "y": data.columns[spec.y].name,
        "cs": [data.columns[c].name for c in spec.cs],
        "g2": res.g2,
        "chi2": res.chi2,
        "dof": res.dof,
        "dof_adjusted": res.dof_adjusted,
        "log_p_g2": res.log_p_g2,
        "log_p_chi2": res.log_p_chi2,
        "empty_strata": res.empty_strata,
        "method": res.method,
    }


def _tsv_cell(value) -> str:
    if isinstance(value, float):
        return _TSV_FLOAT % value
    if isinstance(value, list):
        return ",".join(value)
    return str(value)


def _cmd_test(args: argparse.Namespace) -> int:
    data = _load_dataset(args)
    spec = TestSpec(
        x=_resolve_column(args.x, data),
        y=_resolve_column(args.y, data),
        cs=_parse_cs(args.cs, data),
    )
    res = ci_test(data, spec, method=_method_name(args.method), adjust_dof=args.adjust_dof)
    fields = _result_fields(data, spec, res)
    fields["p_g2"] = math.exp(res.log_p_g2)
    fields["p_chi2"] = math.exp(res.log_p_chi2)
    fields["degenerate"] = res.degenerate
    if args.format == "json":
        print(json.dumps(fields))
    else:
        keys = list(fields)
        print("\t".join(keys))
        print("\t".join(_tsv_cell(fields[k]) for k in keys))
    return 0


def _read_pairs(args: argparse.Namespace, data: Dataset) -> list[TestSpec]:
    cs = _parse_cs(args.cs, data)
    if args.pairs == "all":
        candidates = [i for i in range(data.n_cols) if i not in cs]
        return [TestSpec(x=i, y=j, cs=cs) for i, j in combinations(candidates, 2)]
    try:
        text = Path(args.pairs).read_text(encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot read pairs file {args.pairs}: {err}") from err
    specs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = [t for t in line.replace(",", " ").split() if t]
        if len(tokens) != 2:
            raise DataError(f"pairs file line {lineno}: expected two columns, got {len(tokens)}")
        specs.append(
            TestSpec(x=_resolve_column(tokens[0], data), y=_resolve_column(tokens[1], data), cs=cs)
        )
    if not specs:
        raise DataError("pairs file lists no pairs")
    return specs


def _cmd_batch(args: argparse.Namespace) -> int:
    data = _load_dataset(args)
    specs = _read_pairs(args, data)
    results = batch_screen(
        data,
        specs,
        workers=args.workers,
        method=_method_name(args.method),
        adjust_dof=args.adjust_dof,
    )
    rows = [_result_fields(data, s, r) for s, r in zip(specs, results)]
    if args.format == "jsonl":
        for row in rows:
            print(json.dumps(row))
    else:
        keys = list(rows[0])
        print("\t".join(keys))
        for row in rows:
            print("\t".join(_tsv_cell(row[k]) for k in keys))
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    try:
        levels = tuple(int(tok) for tok in args.levels.split(","))
        config = io_mod.GenConfig(
            n=args.n,
            levels=levels,
            dependence={"null": "null_ci", "dependent": "dependent"}[args.mode],
            seed=args.seed,
        )
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2  # bad flag values are usage errors
    data = io_mod.generate(config)
    io_mod.write_delimited(data, args.out)
    return 0


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _cmd_bench(args: argparse.Namespace) -> int:
    kwargs = {}
    if args.test_counts:
        kwargs["test_counts"] = _parse_int_list(args.test_counts)
    if args.sample_sizes:
        kwargs["sample_sizes"] = _parse_int_list(args.sample_sizes)
    if args.scenarios:
        kwargs["scenarios"] = tuple(
            _parse_int_list(block) for block in args.scenarios.split(";") if block.strip()
        )
    if args.repetitions:
        kwargs["repetitions"] = args.repetitions
    if args.methods:
        kwargs["methods"] = tuple(_method_name(m.strip()) for m in args.methods.split(","))
    kwargs["batch_workers"] = args.batch_workers
    kwargs["seed"] = args.seed
    try:
        config = bench_mod.BenchConfig(**kwargs)
    except (ValueError, KeyError) as err:
        print(f"error: bad benchmark configuration: {err}", file=sys.stderr)
        return 2
    report = bench_mod.emit_report(bench_mod.run_bench(config), format=args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
    else:
        sys.stdout.write(report)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catci",
        description="Conditional independence tests for categorical data "
        "(G2 and chi-squared, natural-log p-values).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data", required=True, help="delimited text dataset")
        p.add_argument("--delimiter", default=",", help="field delimiter ('tab' for tabs)")
        p.add_argument("--no-header", action="store_true", help="data has no header row")

    p_test = sub.add_parser("test", help="one conditional independence test")
    add_data_flags(p_test)
    p_test.add_argument("--x", required=True, help="first variable (name or 0-based index)")
    p_test.add_argument("--y", required=True, help="second variable (name or 0-based index)")
    p_test.add_argument("--cs", default="", help="comma-separated conditioning columns")
    p_test.add_argument("--method", choices=("closed", "closed_form", "ipf"), default="closed")
    p_test.add_argument("--adjust-dof", action="store_true", dest="adjust_dof",
                        help="use dof counting only occupied conditioning combinations")
    p_test.add_argument("--format", choices=("json", "tsv"), default="json")
    p_test.set_defaults(handler=_cmd_test)

    p_batch = sub.add_parser("batch", help="screen many pairs")
    add_data_flags(p_batch)
    p_batch.add_argument("--pairs", required=True,
                         help="'all' or a file with one 'x y' (or 'x,y') pair per line")
    p_batch.add_argument("--cs", default="", help="conditioning columns applied to every pair")
    p_batch.add_argument("--workers", type=int, default=1)
    p_batch.add_argument("--method", choices=("closed", "closed_form", "ipf"), default="closed")
    p_batch.add_argument("--adjust-dof", action="store_true", dest="adjust_dof")
    p_batch.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p_batch.set_defaults(handler=_cmd_batch)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("--n", type=int, required=True, help="number of rows")
    p_gen.add_argument("--levels", required=True,
                       help="comma-separated level counts for X,Y,Z1..Zk (e.g. 3,4,2,4,4)")
    p_gen.add_argument("--mode", choices=("null", "dependent"), default="null")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="output path")
    p_gen.set_defaults(handler=_cmd_gen)

    p_bench = sub.add_parser("bench", help="timing benchmark over the scenario grid")
    p_bench.add_argument("--test-counts", default="", help="e.g. 500,1000,2000,3000,5000")
    p_bench.add_argument("--sample-sizes", default="", help="e.g. 3000,5000,10000")
    p_bench.add_argument("--scenarios", default="",
                         help="semicolon-separated level tuples, e.g. '3,4,2;3,4,2,4,4'")
    p_bench.add_argument("--repetitions", type=int, default=0, help="0 keeps the default (50)")
    p_bench.add_argument("--methods", default="", help="subset of closed,ipf")
    p_bench.add_argument("--batch-workers", type=int, default=0,
                         help="also time batch_screen with this many workers")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--format", choices=("tsv", "markdown"), default="tsv")
    p_bench.add_argument("--out", default="", help="write the report here instead of stdout")
    p_bench.set_defaults(handler=_cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SpecError as err:
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_SPEC
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_DATA
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
