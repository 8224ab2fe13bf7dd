#!/usr/bin/env python3
"""Timing study over the full benchmark grid.

The default grid is T in (500, 1000, 2000, 3000, 5000) tests, n in
(3000, 5000, 10000) rows, and the three conditioning scenarios with 12, 48
and 192 degrees of freedom, 50 repetitions per cell — expect it to run for
a long while.  Use --quick for a small sanity grid.
"""

import argparse
import sys
import time
from pathlib import Path

from catci.bench import BenchConfig, emit_report, run_bench


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="small grid (T=50,100; n=3000; ~seconds instead of hours)")
    parser.add_argument("--repetitions", type=int, default=0,
                        help="override repetitions (default 50, or 3 with --quick)")
    parser.add_argument("--batch-workers", type=int, default=0,
                        help="also time batch_screen with this many workers")
    parser.add_argument("--out", type=Path, default=Path("timing_study.tsv"))
    args = parser.parse_args(argv)

    if args.quick:
        config = BenchConfig(
            test_counts=(50, 100),
            sample_sizes=(3000,),
            repetitions=args.repetitions or 3,
            batch_workers=args.batch_workers,
        )
    else:
        config = BenchConfig(
            repetitions=args.repetitions or 50,
            batch_workers=args.batch_workers,
        )

    started = time.perf_counter()
    records = run_bench(config)
    elapsed = time.perf_counter() - started

    args.out.write_text(emit_report(records, format="tsv"))
    print(emit_report(records, format="markdown"))
    print(f"{len(records)} records in {elapsed:.1f} s -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
