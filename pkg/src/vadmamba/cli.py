"""Command-line entry point: generate-data, train-fp, train-fr, score, eval,
bench-scan and experiment-t.

Every subcommand writes ``manifest.json`` next to its outputs with the resolved
configuration, seed, build identifier, paths, wall-clock time and (for scoring)
the end-to-end frames-per-second figure.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import scoring as S
from .checkpoint import load_model
from .errors import (CheckpointMismatch, ConfigMismatch, CorruptFile, EmptyDataset, IncompatibleCheckpoint,
                     LabelLeak, MalformedCsv, MissingComponent, MissingData, NumericFailure)
from .scan import selective_scan_fast, selective_scan_naive
from .synthvid import GeneratorConfig, generate_dataset, load_dataset, save_dataset
from .trainer import (DESK_LR, TrainConfig, clip_ids, flow_target, predict_flows, predict_frames,
                      train_fp, train_fr, windows)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SCORE_COLUMNS = ["clip_id", "frame_index", "psnr_p", "psnr_r", "s_p", "s_r", "fused", "label", "choice"]
DEFAULT_TS = (4, 8, 12, 16)
BENCH_LENGTHS = (256, 512, 1024, 2048, 4096)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# manifests and config
# ---------------------------------------------------------------------------

def build_id() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return "git-" + out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


@dataclass
class RunManifest:
    subcommand: str
    argv: list
    config: dict
    seed: int
    build: str
    inputs: dict
    outputs: dict
    wall_seconds: float
    frames: int | None = None
    fps: float | None = None

    def write(self, directory) -> Path:
        path = Path(directory) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.__dict__, indent=2, default=str))
        return path


def read_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config JSON must be an object")
    unknown = set(data) - {"generator", "train", "fr"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    return data


def desk_train_config(section: dict | None, seed: int, **overrides) -> TrainConfig:
    """TrainConfig for desk runs: desk learning rate unless the config sets one."""
    d = {"lr": DESK_LR}
    d.update(section or {})
    d.update({k: v for k, v in overrides.items() if v is not None})
    d["seed"] = seed
    try:
        return TrainConfig.from_dict(d)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def _load_data(root):
    if root is None or not Path(root).is_dir():
        raise MissingData(f"dataset directory {root} not found")
    return load_dataset(root)


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

@dataclass
class ClipScores:
    clip_id: str
    psnr_p: np.ndarray
    psnr_r: np.ndarray
    labels: np.ndarray


def score_clip(fp_model, fr_model, clip, clip_id: str, t: int) -> ClipScores:
    """PSNR of FP's predicted frame and of FR's reconstructed flow for every window."""
    wins = windows([clip], t, [clip_id])
    frames = predict_frames(fp_model, [clip], wins, t)
    flows = predict_flows(fr_model, frames)
    pp = np.array([S.psnr(frames[i, 0], clip.frames[w.start + t]) for i, w in enumerate(wins)])
    pr = np.array([S.psnr(flows[i], flow_target(clip, w.start, t)) for i, w in enumerate(wins)])
    return ClipScores(clip_id, pp, pr, clip.labels[t:].astype(np.int64))


def fuse_scores(scores: Sequence[ClipScores], sigma: float = 3.0, scope: str = "clip") -> S.FusionResult:
    sp = S.anomaly_scores_set([c.psnr_p for c in scores], sigma, scope)
    sr = S.anomaly_scores_set([c.psnr_r for c in scores], sigma, scope)
    return S.clip_fusion([(a, b, c.labels, c.clip_id) for a, b, c in zip(sp, sr, scores)])


def check_compatible(model_cfg, clips, in_channels: int, what: str) -> None:
    h, w = clips[0].frames.shape[1:]
    if (model_cfg.height, model_cfg.width) != (h, w) or model_cfg.in_channels != in_channels:
        raise IncompatibleCheckpoint(
            f"{what} checkpoint expects {model_cfg.in_channels} channels at "
            f"{model_cfg.height}x{model_cfg.width}; data is {h}x{w}")


def run_scoring(fp_ckpt, fr_ckpt, clips, ids, sigma: float = 3.0, scope: str = "clip"):
    fp_model, fp_cfg = load_model(fp_ckpt)
    fr_model, fr_cfg = load_model(fr_ckpt)
    t = fp_cfg.in_channels
    check_compatible(fp_cfg, clips, t, "FP")
    check_compatible(fr_cfg, clips, 1, "FR")
    raw = [score_clip(fp_model, fr_model, c, cid, t) for c, cid in zip(clips, ids)]
    return raw, fuse_scores(raw, sigma, scope)


def write_scores(path, raw: Sequence[ClipScores], fused: S.FusionResult, t: int) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SCORE_COLUMNS)
        for r, s in zip(raw, fused.clips):
            for i in range(len(s.labels)):
                w.writerow([s.clip_id, i + t, repr(float(r.psnr_p[i])), repr(float(r.psnr_r[i])),
                            repr(float(s.s_p[i])), repr(float(s.s_r[i])), repr(float(s.fused[i])),
                            int(s.labels[i]), s.choice])


def write_curves(directory, fused: S.FusionResult, t: int) -> None:
    """One whitespace-separated file per clip, plottable with gnuplot."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for s in fused.clips:
        name = s.clip_id.replace("/", "_")
        with open(d / f"{name}.dat", "w") as f:
            f.write("# frame s_p s_r fused label\n")
            for i in range(len(s.labels)):
                f.write(f"{i + t} {s.s_p[i]:.6f} {s.s_r[i]:.6f} {s.fused[i]:.6f} {int(s.labels[i])}\n")


def read_scores(path) -> list[S.ScoreSeries]:
    """Parse scores.csv back into per-clip series (frame order as written)."""
    try:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
            header = rows[0].keys() if rows else None
    except FileNotFoundError:
        raise MissingData(f"{path} not found") from None
    need = {"clip_id", "s_p", "s_r", "label"}
    if not rows or not need <= set(header):
        raise MalformedCsv(f"{path}: expected columns {sorted(need)}")
    clips: dict[str, dict[str, list]] = {}
    for n, r in enumerate(rows, start=2):
        try:
            sp, sr, lab = float(r["s_p"]), float(r["s_r"]), int(r["label"])
            fu = float(r["fused"]) if r.get("fused") not in (None, "") else None
        except (TypeError, ValueError):
            raise MalformedCsv(f"{path}: bad value on line {n}") from None
        if lab not in (0, 1):
            raise MalformedCsv(f"{path}: label must be 0 or 1 on line {n}")
        c = clips.setdefault(r["clip_id"], {"s_p": [], "s_r": [], "labels": [], "fused": []})
        c["s_p"].append(sp)
        c["s_r"].append(sr)
        c["labels"].append(lab)
        c["fused"].append(fu)
    return [S.fuse_clip(cid, c["s_p"], c["s_r"], c["labels"]) for cid, c in clips.items()]


def evaluate(series: Sequence[S.ScoreSeries]) -> dict:
    """Per-clip and overall AUCs; fusion is recomputed from s_p and s_r."""
    labels = [s.labels for s in series]
    all_labels = np.concatenate(labels)
    degenerate = S.is_degenerate(all_labels)

    def overall(key):
        return None if degenerate else S.overall_auc([getattr(s, key) for s in series], labels)

    per_clip = []
    for s in series:
        deg = S.is_degenerate(s.labels)
        per_clip.append({
            "clip_id": s.clip_id,
            "auc_p": None if deg else S.frame_auc(s.s_p, s.labels),
            "auc_r": None if deg else S.frame_auc(s.s_r, s.labels),
            "auc_fused": None if deg else S.frame_auc(s.fused, s.labels),
            "selection": s.choice,
            "degenerate": deg,
        })
    return {"clips": per_clip, "degenerate": degenerate, "auc_fused": overall("fused"),
            "auc_fp_only": overall("s_p"), "auc_fr_only": overall("s_r")}


def format_report(rep: dict) -> str:
    def f(v):
        return "undefined" if v is None else f"{v:.4f}"
    lines = [f"{'clip':<18} {'AUC(s_p)':>9} {'AUC(s_r)':>9} {'AUC(fused)':>11} selection"]
    for c in rep["clips"]:
        lines.append(f"{c['clip_id']:<18} {f(c['auc_p']):>9} {f(c['auc_r']):>9} "
                     f"{f(c['auc_fused']):>11} {c['selection']}")
    lines.append(f"overall fused AUC: {f(rep['auc_fused'])}")
    lines.append(f"overall FP-only AUC (w/o FR): {f(rep['auc_fp_only'])}")
    lines.append(f"overall FR-only AUC (w/o FP): {f(rep['auc_fr_only'])}")
    if rep["degenerate"]:
        lines.append("labels contain a single class: AUC is undefined (degenerate)")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def bench_scan(lengths=BENCH_LENGTHS, d: int = 16, s: int = 16, reps: int = 15, seed: int = 0,
               chunk: int | None = None, min_seconds: float = 0.2) -> list[dict]:
    """Best-of-``reps`` wall time for the naive and chunked scans at each length.

    Lengths are measured round-robin so that slow drifts of the machine affect
    every length alike; each length gets at least ``min_seconds`` of samples.
    """
    from .scan import DEFAULT_CHUNK

    rng = np.random.default_rng(seed)
    cases = {}
    for L in lengths:
        args = (rng.standard_normal((L, d)).astype(np.float32),
                rng.uniform(0.01, 0.2, (L, d)).astype(np.float32),
                np.log(rng.uniform(0.5, 4.0, (d, s))).astype(np.float32),
                rng.standard_normal((L, s)).astype(np.float32),
                rng.standard_normal((L, s)).astype(np.float32),
                np.ones(d, np.float32))
        cases[L] = {
            "naive": lambda a=args: selective_scan_naive(*a),
            "fast": lambda a=args: selective_scan_fast(*a, chunk=chunk or DEFAULT_CHUNK),
        }
    best = {(L, k): np.inf for L in lengths for k in ("naive", "fast")}
    spent = {key: 0.0 for key in best}
    r = 0
    while r < reps or min(spent.values()) < min_seconds:
        for L in lengths:
            for kind, fn in cases[L].items():
                if r >= reps and spent[(L, kind)] >= min_seconds:
                    continue
                t0 = time.perf_counter()
                fn()
                dt = time.perf_counter() - t0
                best[(L, kind)] = min(best[(L, kind)], dt)
                spent[(L, kind)] += dt
        r += 1
    rows = []
    prev = None
    for L in lengths:
        elems = L * d * s
        tn, tf = best[(L, "naive")], best[(L, "fast")]
        rows.append({"L": L, "D": d, "S": s, "naive_s": tn, "fast_s": tf,
                     "naive_ns_per_elem": 1e9 * tn / elems, "fast_ns_per_elem": 1e9 * tf / elems,
                     "fast_ratio": None if prev is None else tf / prev})
        prev = tf
    return rows


def write_rows(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if v is None else v for k, v in r.items()})


# ---------------------------------------------------------------------------
# experiment over t
# ---------------------------------------------------------------------------

def experiment_t(ds, ts: Sequence[int], train: TrainConfig, out_dir, fr_ckpt=None,
                 fr_train: TrainConfig | None = None, fp_ckpts: dict | None = None) -> dict:
    """Train FP at each t and score it with one FR model.

    FR is trained once, on the FP of the largest t, unless ``fr_ckpt`` is given;
    ``fp_ckpts`` may supply already trained FP models for some t values.
    """
    out = Path(out_dir)
    fp_ckpts = dict(fp_ckpts or {})
    for t in ts:
        if t < 1:
            raise ConfigError(f"t must be >= 1, got {t}")
    for t in ts:
        if t not in fp_ckpts:
            cfg = TrainConfig.from_dict({**train.to_dict(), "t": t})
            fp_ckpts[t] = train_fp(ds.train, cfg, ds.val, out_dir=out / f"fp_t{t}").best_path
    if fr_ckpt is None:
        t_max = max(ts)
        cfg = TrainConfig.from_dict({**(fr_train or train).to_dict(), "t": t_max})
        fr_ckpt = train_fr(ds.train, fp_ckpts[t_max], cfg, ds.val, out_dir=out / "fr").best_path
    ids = clip_ids(ds.test, "test")
    table = {"FP": {}, "MIX": {}}
    per_clip = []
    for t in ts:
        raw, fused = run_scoring(fp_ckpts[t], fr_ckpt, ds.test, ids)
        rep = evaluate(fused.clips)
        table["FP"][t] = rep["auc_fp_only"]
        table["MIX"][t] = rep["auc_fused"]
        for c in rep["clips"]:
            per_clip.append({"t": t, **c})
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "table_t.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method"] + [f"t={t}" for t in ts])
        for method in ("FP", "MIX"):
            w.writerow([method] + [repr(table[method][t]) for t in ts])
    write_rows(out / "per_clip_t.csv", per_clip)
    return {"table": table, "fp_ckpts": {t: str(p) for t, p in fp_ckpts.items()}, "fr_ckpt": str(fr_ckpt)}


def read_table(path) -> dict[str, dict[int, float]]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    ts = [int(h.split("=")[1]) for h in rows[0][1:]]
    return {r[0]: {t: float(v) for t, v in zip(ts, r[1:])} for r in rows[1:]}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args, conf) -> RunManifest:
    gen = dict(conf.get("generator", {}))
    for key in ("train_clips", "test_clips", "frames", "height", "width"):
        v = getattr(args, key)
        if v is not None:
            gen[key] = v
    try:
        gcfg = GeneratorConfig.from_dict(gen)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    ds = generate_dataset(gcfg, args.seed)
    save_dataset(args.out, ds)
    n = sum(c.length for c in ds.train + ds.val + ds.test)
    return RunManifest("generate-data", [], {"generator": gcfg.to_dict()}, args.seed, build_id(),
                       {}, {"data": str(args.out)}, 0.0, frames=n)


def cmd_train_fp(args, conf) -> RunManifest:
    ds = _load_data(args.data)
    cfg = desk_train_config(conf.get("train"), args.seed, epochs=args.epochs, t=args.t,
                            max_steps=args.max_steps, checkpoint_dir=str(args.out))
    res = train_fp(ds.train, cfg, ds.val, out_dir=args.out, resume=args.resume)
    return RunManifest("train-fp", [], {"train": cfg.to_dict()}, args.seed, build_id(),
                       {"data": str(args.data)},
                       {"best": str(res.best_path), "last": str(res.last_path),
                        "loss_csv": str(Path(args.out) / "fp_loss.csv")}, 0.0)


def cmd_train_fr(args, conf) -> RunManifest:
    ds = _load_data(args.data)
    section = conf.get("fr", conf.get("train"))
    cfg = desk_train_config(section, args.seed, epochs=args.epochs, t=args.t,
                            max_steps=args.max_steps, checkpoint_dir=str(args.out))
    if not Path(args.fp).exists():
        raise CheckpointMismatch(f"FP checkpoint {args.fp} not found")
    if args.t is None:
        from .checkpoint import load_config
        cfg = TrainConfig.from_dict({**cfg.to_dict(), "t": load_config(args.fp).in_channels})
    res = train_fr(ds.train, args.fp, cfg, ds.val, out_dir=args.out, resume=args.resume)
    return RunManifest("train-fr", [], {"train": cfg.to_dict()}, args.seed, build_id(),
                       {"data": str(args.data), "fp": str(args.fp)},
                       {"best": str(res.best_path), "last": str(res.last_path),
                        "loss_csv": str(Path(args.out) / "fr_loss.csv")}, 0.0)


def cmd_score(args, conf) -> RunManifest:
    t0 = time.perf_counter()
    ds = _load_data(args.data)
    for p in (args.fp, args.fr):
        if not Path(p).exists():
            raise IncompatibleCheckpoint(f"checkpoint {p} not found")
    ids = clip_ids(ds.test, "test")
    raw, fused = run_scoring(args.fp, args.fr, ds.test, ids, args.sigma, args.norm_scope)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t = len(ds.test[0].labels) - len(fused.clips[0].labels)
    write_scores(out / "scores.csv", raw, fused, t)
    write_curves(out / "curves", fused, t)
    wall = time.perf_counter() - t0
    frames = sum(len(s.labels) for s in fused.clips)
    return RunManifest("score", [], {"sigma": args.sigma, "norm_scope": args.norm_scope, "t": t},
                       args.seed, build_id(),
                       {"data": str(args.data), "fp": str(args.fp), "fr": str(args.fr)},
                       {"scores": str(out / "scores.csv"), "curves": str(out / "curves")},
                       wall, frames=frames, fps=frames / wall)


def cmd_eval(args, conf) -> RunManifest:
    rep = evaluate(read_scores(args.scores))
    print(format_report(rep))
    out = _output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(rep, indent=2))
    return RunManifest("eval", [], {}, args.seed, build_id(), {"scores": str(args.scores)},
                       {"report": str(out / "report.json")}, 0.0)


def cmd_bench(args, conf) -> RunManifest:
    rows = bench_scan(args.lengths, args.d, args.s, args.reps, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "bench_scan.csv", rows)
    for r in rows:
        ratio = "" if r["fast_ratio"] is None else f"  ratio {r['fast_ratio']:.2f}"
        print(f"L={r['L']:>5}  naive {r['naive_ns_per_elem']:8.2f} ns/elem  "
              f"fast {r['fast_ns_per_elem']:8.2f} ns/elem{ratio}")
    return RunManifest("bench-scan", [], {"lengths": list(args.lengths), "d": args.d, "s": args.s,
                                          "reps": args.reps}, args.seed, build_id(), {},
                       {"csv": str(out / "bench_scan.csv")}, 0.0)


def cmd_experiment_t(args, conf) -> RunManifest:
    ds = _load_data(args.data)
    train = desk_train_config(conf.get("train"), args.seed, epochs=args.epochs, max_steps=args.max_steps)
    fr_cfg = desk_train_config(conf.get("fr", conf.get("train")), args.seed, epochs=args.epochs,
                               max_steps=args.max_steps)
    res = experiment_t(ds, args.ts, train, args.out, fr_ckpt=args.fr, fr_train=fr_cfg)
    print("method " + " ".join(f"t={t:<6}" for t in args.ts))
    for m in ("FP", "MIX"):
        print(f"{m:<6} " + " ".join(f"{res['table'][m][t]:.4f}  " for t in args.ts))
    return RunManifest("experiment-t", [], {"ts": list(args.ts), "train": train.to_dict()}, args.seed,
                       build_id(), {"data": str(args.data)},
                       {"table": str(Path(args.out) / "table_t.csv"), **res}, 0.0)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vadmamba", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="JSON file with optional 'generator', 'train', 'fr' sections")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS/OpenMP thread cap (falls back to $VADM_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="write a synthetic dataset")
    g.add_argument("--out", required=True)
    for key in ("train_clips", "test_clips", "frames", "height", "width"):
        g.add_argument("--" + key.replace("_", "-"), dest=key, type=int)
    g.set_defaults(func=cmd_generate)

    for name, func in (("train-fp", cmd_train_fp), ("train-fr", cmd_train_fr)):
        s = sub.add_parser(name)
        s.add_argument("--data", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--epochs", type=int)
        s.add_argument("--t", type=int)
        s.add_argument("--max-steps", type=int)
        s.add_argument("--resume", action="store_true")
        if name == "train-fr":
            s.add_argument("--fp", required=True, help="FP checkpoint (.vadm)")
        s.set_defaults(func=func)

    s = sub.add_parser("score")
    s.add_argument("--data", required=True)
    s.add_argument("--fp", required=True)
    s.add_argument("--fr", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--sigma", type=float, default=3.0)
    s.add_argument("--norm-scope", choices=S.NORM_SCOPES, default="clip",
                   help="PSNR min-max range: per test clip (default) or over the whole test set")
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("eval")
    e.add_argument("--scores", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench-scan")
    b.add_argument("--out", required=True)
    b.add_argument("--lengths", type=int, nargs="+", default=list(BENCH_LENGTHS))
    b.add_argument("--d", type=int, default=16)
    b.add_argument("--s", type=int, default=16)
    b.add_argument("--reps", type=int, default=15)
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("experiment-t")
    x.add_argument("--data", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--ts", type=int, nargs="+", default=list(DEFAULT_TS))
    x.add_argument("--epochs", type=int)
    x.add_argument("--max-steps", type=int)
    x.add_argument("--fr", help="reuse this FR checkpoint instead of training one")
    x.set_defaults(func=cmd_experiment_t)
    return p


def _output_dir(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    # eval defaults to a subdirectory so the score run's manifest is not replaced
    return Path(args.scores).parent / "eval"


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    threads = args.threads or (int(os.environ["VADM_THREADS"]) if os.environ.get("VADM_THREADS") else None)
    try:
        conf = read_config(args.config)
        t0 = time.perf_counter()
        if threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=threads):
                manifest = args.func(args, conf)
        else:
            manifest = args.func(args, conf)
        if not manifest.wall_seconds:
            manifest.wall_seconds = time.perf_counter() - t0
        manifest.argv = argv
        manifest.config = {**manifest.config, "threads": threads}
        manifest.write(_output_dir(args))
    except NumericFailure as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MissingData, CorruptFile, MissingComponent, EmptyDataset, MalformedCsv, LabelLeak) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ConfigMismatch, CheckpointMismatch, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
