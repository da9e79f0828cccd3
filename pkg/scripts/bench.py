"""Scan throughput: naive vs chunked per-element time over doubling lengths.

    python3 scripts/bench.py --out runs/bench
"""

import argparse
import sys

from vadmamba import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/bench")
    ap.add_argument("--lengths", type=int, nargs="+", default=list(cli.BENCH_LENGTHS))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    return cli.main(["--threads", str(args.threads), "bench-scan", "--out", args.out,
                     "--lengths", *map(str, args.lengths)])


if __name__ == "__main__":
    sys.exit(main())
