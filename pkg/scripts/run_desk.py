"""Desk-scale end-to-end run: generate data, train FP then FR, score and evaluate.

    python3 scripts/run_desk.py --out runs/desk --seed 0
"""

import argparse
import sys
import time
from pathlib import Path

from vadmamba import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", help="optional JSON config passed to every subcommand")
    args = ap.parse_args()
    out = Path(args.out)
    base = ["--seed", str(args.seed)] + (["--config", args.config] if args.config else [])
    data, fp, fr, sc = (str(out / d) for d in ("data", "fp", "fr", "scores"))
    steps = [
        ["generate-data", "--out", data],
        ["train-fp", "--data", data, "--out", fp],
        ["train-fr", "--data", data, "--fp", f"{fp}/fp_best.vadm", "--out", fr],
        ["score", "--data", data, "--fp", f"{fp}/fp_best.vadm", "--fr", f"{fr}/fr_best.vadm", "--out", sc],
        ["eval", "--scores", f"{sc}/scores.csv"],
    ]
    t0 = time.perf_counter()
    for argv in steps:
        print(f"[{time.perf_counter() - t0:7.1f} s] vadmamba {' '.join(argv)}", flush=True)
        code = cli.main(base + argv)
        if code:
            return code
    print(f"done in {time.perf_counter() - t0:.0f} s; report in {sc}/eval/report.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
