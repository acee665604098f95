#!/usr/bin/env python3
"""Emit the three benchmark tables (estimation, control, satellite formation).

Usage:
    python3 scripts/run_benches.py [--tables 1 2 3] [--seed 0] [--out-dir DIR]

Counts are seed-dependent; orderings and trends are the stable part. The
control table (2) runs dual subgradient to its full 5000-iteration cap and
takes about ten minutes; the other two finish in well under a minute.
"""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from netopt.harness import bench_table


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--tables", type=int, nargs="+", default=[1, 2, 3],
                    choices=[1, 2, 3])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default=None, help="write CSVs here as well")
    args = ap.parse_args()

    out = pathlib.Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for tid in args.tables:
        t0 = time.perf_counter()
        table = bench_table(tid, seed=args.seed)
        print(table.to_text())
        print("  (%.1f s)\n" % (time.perf_counter() - t0))
        if out:
            path = out / f"table{tid}.csv"
            path.write_text(table.to_csv(), encoding="utf-8")
            print(f"  wrote {path}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
