"""Deterministic synthetic surveillance clips with exact optical flow and labels.

Scenes are rigid shapes moving over a static background. Object positions are
kept in fixed-point units of 1/SUBPIXEL pixel and rasterized by integer floor
division, so geometry involves no floating-point rounding and the flow of a
frame is the exact integer displacement of every visible object.

Training clips contain only normal motion: speed at most ``v_norm`` pixels per
frame and heading changes of one compass step (22.5 degrees) at a time.
Test clips carry one anomalous segment of a single type:

* ``speed``: an intruder crosses the scene at >= 3 * v_norm px/frame,
* ``reversal``: an object flips its heading by 180 degrees every frame,
* ``novel``: an intruder of an unseen shape and texture moves normally.

Frame ``f`` is labelled anomalous iff the motion into ``f`` (flow ``f-1``)
violates the envelope or a novel object is visible in ``f``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadResolution, CorruptFile, MissingComponent, TooShort

SUBPIXEL = 8
LEVELS = 65535
NORMAL_SHAPES = ("square", "disk")
NOVEL_SHAPES = ("ring",)
ANOMALY_TYPES = ("speed", "reversal", "novel")
FLOW_MAGIC = b"FLO2"
_N_DIRS = 16


def levels_to_float(levels: np.ndarray) -> np.ndarray:
    """uint16 intensity levels -> float32 in [-1, 1]."""
    return (levels.astype(np.float32) * np.float32(2.0 / LEVELS) - np.float32(1.0)).astype(np.float32)


# one integer velocity per compass direction and subpixel speed, built once
def _direction_table() -> dict[int, list[tuple[int, int]]]:
    table = {}
    for speed in range(0, 8 * SUBPIXEL + 1):
        row = []
        for k in range(_N_DIRS):
            ang = 2 * math.pi * k / _N_DIRS
            row.append((int(round(speed * math.cos(ang))), int(round(speed * math.sin(ang)))))
        table[speed] = row
    return table


_DIRS = _direction_table()


@dataclass
class GeneratorConfig:
    height: int = 64
    width: int = 64
    frames: int = 48
    t: int = 16
    train_clips: int = 8
    test_clips: int = 6
    val_clips: int = 1
    objects: int = 2
    v_norm: float = 1.0
    turn_prob: float = 0.08
    bg_slope: int = 0                 # max |intensity-level slope| of the background per pixel
    bg_texture: int = 8000            # amplitude of the static background texture, in levels
    shared_scene: bool = True         # one fixed backdrop for the whole dataset (a fixed camera)
    anomaly_len: tuple[int, int] = (10, 14)
    anomaly_types: tuple[str, ...] = ANOMALY_TYPES

    def validate(self) -> None:
        if self.height % 32 or self.width % 32 or self.height < 32 or self.width < 32:
            raise BadResolution(f"resolution {self.height}x{self.width} must be a positive multiple of 32")
        if self.frames <= self.t + 1:
            raise TooShort(f"clips of {self.frames} frames cannot hold t+1 = {self.t + 1}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        if "anomaly_len" in d:
            d["anomaly_len"] = tuple(d["anomaly_len"])
        if "anomaly_types" in d:
            d["anomaly_types"] = tuple(d["anomaly_types"])
        return cls(**d)


@dataclass
class SceneObject:
    shape: str
    size: int
    level: int                       # uint16 intensity level
    xs: list[int] = field(default_factory=list)   # raster column of the anchor, per frame
    ys: list[int] = field(default_factory=list)   # raster row of the anchor, per frame
    visible: list[bool] = field(default_factory=list)


@dataclass
class SynClip:
    frames: np.ndarray               # (T, H, W) float32 in [-1, 1]
    flows: np.ndarray                # (T-1, H, W, 2) float32, (dx, dy) pixels
    labels: np.ndarray               # (T,) int64 in {0, 1}
    seed: int
    spec: dict

    @property
    def length(self) -> int:
        return len(self.frames)


@dataclass
class Dataset:
    train: list[SynClip]
    test: list[SynClip]
    val: list[SynClip]
    config: GeneratorConfig


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

def shape_mask(shape: str, size: int) -> np.ndarray:
    """Boolean (size, size) footprint on the integer grid."""
    yy, xx = np.mgrid[0:size, 0:size]
    c2 = size - 1                      # doubled centre coordinate
    dx, dy = 2 * xx - c2, 2 * yy - c2
    r2 = dx * dx + dy * dy
    if shape == "square":
        return np.ones((size, size), bool)
    if shape == "disk":
        return r2 <= size * size
    if shape == "ring":
        inner = (size // 2) * (size // 2)
        return (r2 <= size * size) & (r2 >= inner)
    raise ValueError(f"unknown shape {shape!r}")


def shape_texture(shape: str, size: int, level: int) -> np.ndarray:
    """uint16 intensities over the footprint; novel shapes carry a checkerboard."""
    tex = np.full((size, size), level, dtype=np.int64)
    if shape in NOVEL_SHAPES:
        yy, xx = np.mgrid[0:size, 0:size]
        tex = np.where(((xx // 2) + (yy // 2)) % 2 == 0, level, level // 3)
    return tex.astype(np.uint16)


def background(height: int, width: int, slope_x: int, slope_y: int, base: int,
               texture: np.ndarray | None = None) -> np.ndarray:
    """Static backdrop: a linear ramp plus an optional integer texture."""
    yy, xx = np.mgrid[0:height, 0:width]
    bg = base + slope_x * xx + slope_y * yy
    if texture is not None:
        bg = bg + texture
    return bg.astype(np.uint16)


def integer_texture(rng: np.random.Generator, height: int, width: int, amplitude: int) -> np.ndarray:
    """Per-pixel integer noise with a 2x2 box blur (integer division), in
    [-amplitude, amplitude]; the only source of randomness is ``rng``."""
    if amplitude <= 0:
        return np.zeros((height, width), np.int64)
    raw = rng.integers(-amplitude, amplitude + 1, size=(height + 1, width + 1))
    return (raw[:-1, :-1] + raw[1:, :-1] + raw[:-1, 1:] + raw[1:, 1:]) // 4


def _stamp(canvas, obj_mask, values, x, y):
    h, w = canvas.shape[:2]
    s = obj_mask.shape[0]
    y0, x0 = max(y, 0), max(x, 0)
    y1, x1 = min(y + s, h), min(x + s, w)
    if y0 >= y1 or x0 >= x1:
        return None
    m = obj_mask[y0 - y:y1 - y, x0 - x:x1 - x]
    region = canvas[y0:y1, x0:x1]
    region[m] = values[y0 - y:y1 - y, x0 - x:x1 - x][m] if values.ndim == 2 else values
    return (slice(y0, y1), slice(x0, x1), m)


def render(objects: list[SceneObject], f: int, bg: np.ndarray) -> np.ndarray:
    """uint16 frame ``f``; later objects are drawn on top."""
    canvas = bg.copy()
    for obj in objects:
        if not obj.visible[f]:
            continue
        mask = shape_mask(obj.shape, obj.size)
        tex = shape_texture(obj.shape, obj.size, obj.level)
        _stamp(canvas, mask, tex, obj.xs[f], obj.ys[f])
    return canvas


def analytic_flow(objects: list[SceneObject], f: int, height: int, width: int) -> np.ndarray:
    """Flow from frame ``f`` to ``f+1``: each pixel carries the displacement of the
    topmost object covering it at ``f``; background is zero."""
    flow = np.zeros((height, width, 2), dtype=np.float32)
    for obj in objects:
        if not obj.visible[f]:
            continue
        mask = shape_mask(obj.shape, obj.size)
        if f + 1 < len(obj.xs) and obj.visible[f + 1]:
            d = np.array([obj.xs[f + 1] - obj.xs[f], obj.ys[f + 1] - obj.ys[f]], dtype=np.float32)
        else:
            d = np.zeros(2, np.float32)
        _stamp(flow, mask, d, obj.xs[f], obj.ys[f])
    return flow


def object_displacements(objects: list[SceneObject], f: int) -> list[tuple[int, int]]:
    out = []
    for obj in objects:
        if obj.visible[f] and obj.visible[f + 1]:
            out.append((obj.xs[f + 1] - obj.xs[f], obj.ys[f + 1] - obj.ys[f]))
    return out


# ---------------------------------------------------------------------------
# motion
# ---------------------------------------------------------------------------

def _steer(dir_idx, px, py, size, cfg, margin):
    """Turn one compass step toward the interior when close to a wall."""
    lo = margin * SUBPIXEL
    hi_x = (cfg.width - size - margin) * SUBPIXEL
    hi_y = (cfg.height - size - margin) * SUBPIXEL
    want_x = 1 if px < lo else (-1 if px > hi_x else 0)
    want_y = 1 if py < lo else (-1 if py > hi_y else 0)
    if want_x == 0 and want_y == 0:
        return dir_idx, False
    target = math.atan2(want_y, want_x)
    cur = 2 * math.pi * dir_idx / _N_DIRS
    diff = (target - cur + math.pi) % (2 * math.pi) - math.pi
    if abs(diff) < 2 * math.pi / _N_DIRS / 2:
        return dir_idx, True
    return (dir_idx + (1 if diff > 0 else -1)) % _N_DIRS, True


def _normal_track(rng, cfg: GeneratorConfig, size: int, n_frames: int):
    """Subpixel trajectory with bounded speed and one-step heading changes."""
    vmax = int(round(cfg.v_norm * SUBPIXEL))
    margin = 4
    px = int(rng.integers(margin, cfg.width - size - margin)) * SUBPIXEL
    py = int(rng.integers(margin, cfg.height - size - margin)) * SUBPIXEL
    speed = int(rng.integers(max(1, vmax // 2), vmax + 1))
    dir_idx = int(rng.integers(_N_DIRS))
    xs, ys, dirs = [], [], []
    for _ in range(n_frames):
        xs.append(px)
        ys.append(py)
        dirs.append(dir_idx)
        dir_idx, steered = _steer(dir_idx, px, py, size, cfg, margin)
        if not steered and rng.random() < cfg.turn_prob:
            dir_idx = (dir_idx + int(rng.choice((-1, 1)))) % _N_DIRS
        vx, vy = _DIRS[speed][dir_idx]
        px, py = px + vx, py + vy
    return xs, ys, speed, dirs


def _raster(v: int) -> int:
    return v // SUBPIXEL


def _normal_object(rng, cfg, n_frames, shape=None):
    shape = shape or NORMAL_SHAPES[int(rng.integers(len(NORMAL_SHAPES)))]
    size = int(rng.integers(7, 12))
    level = int(rng.choice((44000, 52000, 60000)))
    xs, ys, speed, dirs = _normal_track(rng, cfg, size, n_frames)
    obj = SceneObject(shape, size, level, [_raster(x) for x in xs], [_raster(y) for y in ys],
                      [True] * n_frames)
    return obj, (xs, ys, speed, dirs)


def _crossing(rng, cfg, size, start, speed_px, n_frames):
    """Straight integer-velocity crossing: off-canvas at ``start - 1``, then across
    the whole frame and out the other side."""
    dirs = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)]
    dx, dy = dirs[int(rng.integers(len(dirs)))]
    vx, vy = dx * speed_px, dy * speed_px

    def entry(d, extent):
        # first on-canvas position along an axis of motion, else a random offset
        if d > 0:
            return -size
        if d < 0:
            return extent
        return int(rng.integers(2, extent - size - 2))

    x0 = entry(dx, cfg.width) if dx else int(rng.integers(2, cfg.width - size - 2))
    y0 = entry(dy, cfg.height) if dy else int(rng.integers(2, cfg.height - size - 2))
    # position at ``start`` is one step past the entry point
    xs = [x0 + vx * (f - start + 1) for f in range(n_frames)]
    ys = [y0 + vy * (f - start + 1) for f in range(n_frames)]
    return xs, ys


def min_anomaly_frames(cfg: GeneratorConfig) -> int:
    """Shortest clip that fits every anomaly type after the first full window."""
    lo, hi = cfg.anomaly_len
    return cfg.t + max(8 + lo, 4 + hi)


def normal_envelope(cfg: GeneratorConfig) -> float:
    """Largest per-pixel flow magnitude a normal object can produce: each raster
    coordinate moves by at most ceil(v_norm) per frame, so a diagonal step reaches
    sqrt(2) times that."""
    return math.sqrt(2.0) * math.ceil(cfg.v_norm)


def _on_canvas(obj: SceneObject, f: int, height: int, width: int) -> bool:
    s = obj.size
    return obj.visible[f] and -s < obj.xs[f] < width and -s < obj.ys[f] < height


def _reversals(xs, ys) -> np.ndarray:
    """Frames whose incoming subpixel velocity points against the previous one."""
    out = np.zeros(len(xs), dtype=bool)
    for f in range(2, len(xs)):
        v0 = (xs[f - 1] - xs[f - 2], ys[f - 1] - ys[f - 2])
        v1 = (xs[f] - xs[f - 1], ys[f] - ys[f - 1])
        out[f] = v0[0] * v1[0] + v0[1] * v1[1] < 0
    return out


# ---------------------------------------------------------------------------
# clip generation
# ---------------------------------------------------------------------------

def scene_background(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Random static backdrop: ramp, base level and texture all drawn from ``rng``."""
    sl = cfg.bg_slope
    return background(cfg.height, cfg.width, int(rng.integers(-sl, sl + 1)), int(rng.integers(-sl, sl + 1)),
                      int(rng.integers(13000, 18000)),
                      integer_texture(rng, cfg.height, cfg.width, cfg.bg_texture))


def generate_clip(cfg: GeneratorConfig, seed: int, anomaly: str | None = None,
                  scene: np.ndarray | None = None) -> SynClip:
    """One clip; ``anomaly`` selects the injected event type (None for a normal clip).

    ``scene`` is a fixed uint16 backdrop; when omitted the clip draws its own.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    T = cfg.frames
    if scene is None:
        bg = scene_background(cfg, rng)
    else:
        if scene.shape != (cfg.height, cfg.width):
            raise BadResolution(f"scene {scene.shape} does not match {cfg.height}x{cfg.width}")
        bg = np.asarray(scene, np.uint16)
    objects, tracks = [], []
    for _ in range(cfg.objects):
        obj, track = _normal_object(rng, cfg, T)
        objects.append(obj)
        tracks.append(track)
    labels = np.zeros(T, dtype=np.int64)
    info: dict = {"type": None}
    if anomaly is not None:
        if anomaly not in ANOMALY_TYPES:
            raise ValueError(f"unknown anomaly type {anomaly!r}")
        info["type"] = anomaly
        lo, hi = cfg.anomaly_len
        first = cfg.t + 2
        if T < min_anomaly_frames(cfg):
            raise TooShort(f"{T} frames cannot hold an anomaly after the first window; "
                           f"need {min_anomaly_frames(cfg)}")
        if anomaly == "speed":
            speed_px = int(math.ceil(3 * normal_envelope(cfg))) + int(rng.integers(0, 2))
            size = int(rng.integers(7, 12))
            shape = NORMAL_SHAPES[int(rng.integers(len(NORMAL_SHAPES)))]
            span = -(-(max(cfg.width, cfg.height) + size) // speed_px)
            start = int(rng.integers(first, max(first + 1, T - span)))
            xs, ys = _crossing(rng, cfg, size, start, speed_px, T)
            obj = SceneObject(shape, size, 60000, xs, ys, [f >= start - 1 for f in range(T)])
            objects.append(obj)
            for f in range(start, T):
                labels[f] = _on_canvas(obj, f, cfg.height, cfg.width)
            info.update(speed_px=speed_px, start=start)
        elif anomaly == "novel":
            size = int(rng.integers(12, 15))
            xs, ys, _, _ = _normal_track(rng, cfg, size, T)
            start = int(rng.integers(first + 6, T - lo + 1))
            obj = SceneObject(NOVEL_SHAPES[0], size, 62000, [_raster(x) for x in xs],
                              [_raster(y) for y in ys], [f >= start for f in range(T)])
            objects.append(obj)
            labels[start:] = 1
            info.update(start=start)
        else:
            # object 0 oscillates back and forth at the maximum normal speed, then
            # keeps going in the direction of its last step
            length = int(rng.integers(lo, hi + 1))
            start = int(rng.integers(first, T - length - 1))
            end = start + length
            obj = objects[0]
            xs, ys, _, dirs = tracks[0]
            vmax = int(round(cfg.v_norm * SUBPIXEL))
            vx, vy = _DIRS[vmax][dirs[start - 1]]
            sub_x, sub_y = list(xs[:start]), list(ys[:start])
            sign = -1
            for f in range(start, end):
                sub_x.append(sub_x[-1] + sign * vx)
                sub_y.append(sub_y[-1] + sign * vy)
                sign = -sign
            sign = -sign
            for f in range(end, T):
                sub_x.append(sub_x[-1] + sign * vx)
                sub_y.append(sub_y[-1] + sign * vy)
            obj.xs = [_raster(x) for x in sub_x]
            obj.ys = [_raster(y) for y in sub_y]
            labels[:] = _reversals(sub_x, sub_y)
            info.update(start=start, end=end, subpixel_x=sub_x, subpixel_y=sub_y)
    frames_u16 = np.stack([render(objects, f, bg) for f in range(T)])
    flows = np.stack([analytic_flow(objects, f, cfg.height, cfg.width) for f in range(T - 1)])
    spec = {
        "seed": seed,
        "height": cfg.height,
        "width": cfg.width,
        "v_norm": cfg.v_norm,
        "background": bg.tolist(),
        "anomaly": info,
        "objects": [asdict(o) for o in objects],
    }
    return SynClip(levels_to_float(frames_u16), flows, labels, seed, spec)


def objects_from_spec(spec: dict) -> list[SceneObject]:
    return [SceneObject(**o) for o in spec["objects"]]


def generate_dataset(cfg: GeneratorConfig | None = None, seed: int = 0) -> Dataset:
    """Normal-only training/validation clips and mixed test clips, all from ``seed``."""
    cfg = cfg or GeneratorConfig()
    cfg.validate()
    n = cfg.train_clips + cfg.val_clips + cfg.test_clips
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(n + 1)]
    scene = scene_background(cfg, np.random.default_rng(seeds[n])) if cfg.shared_scene else None
    train = [generate_clip(cfg, seeds[i], scene=scene) for i in range(cfg.train_clips)]
    val = [generate_clip(cfg, seeds[cfg.train_clips + i], scene=scene) for i in range(cfg.val_clips)]
    off = cfg.train_clips + cfg.val_clips
    test = [generate_clip(cfg, seeds[off + i], cfg.anomaly_types[i % len(cfg.anomaly_types)], scene=scene)
            for i in range(cfg.test_clips)]
    return Dataset(train, test, val, cfg)


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------

def write_pgm16(path: Path, levels: np.ndarray) -> None:
    h, w = levels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{LEVELS}\n".encode("ascii"))
        f.write(levels.astype(">u2").tobytes())


def read_pgm16(path: Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    parts = []
    pos = 0
    while len(parts) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptFile(f"{path}: truncated header")
        parts.append(buf[start:pos])
    pos += 1
    if parts[0] != b"P5":
        raise CorruptFile(f"{path}: not a binary PGM")
    try:
        w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    except ValueError:
        raise CorruptFile(f"{path}: bad header") from None
    if maxval != LEVELS:
        raise CorruptFile(f"{path}: expected 16-bit PGM, maxval {maxval}")
    data = buf[pos:]
    if len(data) != 2 * w * h:
        raise CorruptFile(f"{path}: expected {2 * w * h} data bytes, got {len(data)}")
    return np.frombuffer(data, dtype=">u2").reshape(h, w).astype(np.uint16)


def write_flow(path: Path, flow: np.ndarray) -> None:
    h, w, _ = flow.shape
    with open(path, "wb") as f:
        f.write(FLOW_MAGIC + struct.pack("<II", h, w))
        f.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_flow(path: Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != FLOW_MAGIC:
        raise CorruptFile(f"{path}: bad flow header")
    h, w = struct.unpack("<II", buf[4:12])
    if len(buf) != 12 + h * w * 2 * 4:
        raise CorruptFile(f"{path}: expected {h * w * 8} payload bytes, got {len(buf) - 12}")
    return np.frombuffer(buf[12:], dtype="<f4").reshape(h, w, 2).astype(np.float32)


def float_to_levels(frames: np.ndarray) -> np.ndarray:
    return np.rint((np.asarray(frames, np.float64) + 1.0) * (LEVELS / 2.0)).clip(0, LEVELS).astype(np.uint16)


def save_clip(directory, clip: SynClip) -> None:
    d = Path(directory)
    (d / "frames").mkdir(parents=True, exist_ok=True)
    (d / "flows").mkdir(parents=True, exist_ok=True)
    for i, lv in enumerate(float_to_levels(clip.frames)):
        write_pgm16(d / "frames" / f"frame_{i:06d}.pgm", lv)
    for i, fl in enumerate(clip.flows):
        write_flow(d / "flows" / f"flow_{i:06d}.flo2", fl)
    (d / "labels.txt").write_text("".join(f"{int(v)}\n" for v in clip.labels))
    (d / "spec.json").write_text(json.dumps(clip.spec))


def load_clip(directory) -> SynClip:
    d = Path(directory)
    for part in ("frames", "flows", "labels.txt", "spec.json"):
        if not (d / part).exists():
            raise MissingComponent(f"{d}: missing {part}")
    frame_files = sorted((d / "frames").glob("frame_*.pgm"))
    flow_files = sorted((d / "flows").glob("flow_*.flo2"))
    if not frame_files:
        raise MissingComponent(f"{d}: no frames")
    frames = levels_to_float(np.stack([read_pgm16(p) for p in frame_files]))
    if flow_files:
        flows = np.stack([read_flow(p) for p in flow_files])
    else:
        flows = np.zeros((0,) + frames.shape[1:] + (2,), np.float32)
    if len(flows) != len(frames) - 1:
        raise CorruptFile(f"{d}: {len(frames)} frames but {len(flows)} flows")
    try:
        labels = np.array([int(v) for v in (d / "labels.txt").read_text().split()], dtype=np.int64)
    except ValueError:
        raise CorruptFile(f"{d}: labels must be 0/1 per line") from None
    if len(labels) != len(frames) or not set(labels.tolist()) <= {0, 1}:
        raise CorruptFile(f"{d}: {len(labels)} labels for {len(frames)} frames")
    try:
        spec = json.loads((d / "spec.json").read_text())
    except json.JSONDecodeError:
        raise CorruptFile(f"{d}: unreadable spec.json") from None
    return SynClip(frames, flows, labels, int(spec.get("seed", 0)), spec)


def save_dataset(root, ds: Dataset) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for split in ("train", "val", "test"):
        for i, clip in enumerate(getattr(ds, split)):
            save_clip(root / split / f"clip_{i:03d}", clip)
    (root / "generator.json").write_text(json.dumps(ds.config.to_dict(), indent=2))


def load_dataset(root) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        raise MissingComponent(f"dataset root {root} not found")
    cfg_path = root / "generator.json"
    cfg = GeneratorConfig.from_dict(json.loads(cfg_path.read_text())) if cfg_path.exists() else GeneratorConfig()
    splits = {}
    for split in ("train", "val", "test"):
        dirs = sorted((root / split).glob("clip_*")) if (root / split).is_dir() else []
        splits[split] = [load_clip(p) for p in dirs]
    return Dataset(splits["train"], splits["test"], splits["val"], cfg)
