"""Input-length sweep: FP and fused (MIX) AUC for t in {4, 8, 12, 16}.

Reuses an existing desk run when ``--desk`` points at one (its FP at t=16 and
its FR model); otherwise trains everything from scratch.

    python3 scripts/experiment_t.py --desk runs/desk --out runs/exp_t
"""

import argparse
import sys
from pathlib import Path

from vadmamba import cli
from vadmamba.synthvid import GeneratorConfig, generate_dataset, load_dataset


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/exp_t")
    ap.add_argument("--desk", help="directory written by run_desk.py")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ts", type=int, nargs="+", default=list(cli.DEFAULT_TS))
    args = ap.parse_args()
    train = cli.desk_train_config(None, args.seed)
    fr_ckpt, fp_ckpts = None, {}
    if args.desk:
        desk = Path(args.desk)
        ds = load_dataset(desk / "data")
        fr_ckpt = desk / "fr" / "fr_best.vadm"
        fp_ckpts[ds.config.t] = desk / "fp" / "fp_best.vadm"
    else:
        ds = generate_dataset(GeneratorConfig(), args.seed)
    res = cli.experiment_t(ds, args.ts, train, args.out, fr_ckpt=fr_ckpt, fp_ckpts=fp_ckpts)
    print("method " + " ".join(f"t={t:<6}" for t in args.ts))
    for m in ("FP", "MIX"):
        print(f"{m:<6} " + " ".join(f"{res['table'][m][t]:.4f}  " for t in args.ts))
    return 0


if __name__ == "__main__":
    sys.exit(main())
