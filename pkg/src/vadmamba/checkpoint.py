"""Binary parameter checkpoints.

Layout (little-endian): magic ``b"VADM"``, version u32, then per entry until
end of file: name length u32, UTF-8 name, dtype code u8 (0 = f32, 1 = f64), rank u32,
``rank`` extents as u32, raw values.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointMismatch, CorruptFile

MAGIC = b"VADM"
VERSION = 1
_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def save_checkpoint(path, state: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, arr in state.items():
            arr = np.asarray(arr)
            dt = arr.dtype.newbyteorder("<")
            if dt not in _CODES:
                raise TypeError(f"{name}: unsupported dtype {arr.dtype}")
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<BI", _CODES[dt], arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    pos = 4

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise CorruptFile(f"{path}: truncated at byte {pos}")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise CorruptFile(f"{path}: unsupported version {version}")
    state: dict[str, np.ndarray] = {}
    while pos < len(buf):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        code, rank = struct.unpack("<BI", take(5))
        if code not in _DTYPES:
            raise CorruptFile(f"{path}: unknown dtype code {code}")
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        dt = _DTYPES[code]
        n = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(take(n * dt.itemsize), dtype=dt).reshape(shape)
        state[name] = arr.astype(dt.newbyteorder("="))
    return state


def save_model(path, model, config) -> None:
    """Write ``model`` parameters and a JSON sidecar holding its config."""
    path = Path(path)
    save_checkpoint(path, model.state_dict())
    path.with_suffix(".json").write_text(json.dumps(config.to_dict(), indent=2))


def load_config(path):
    from .net import VqMauConfig

    side = Path(path).with_suffix(".json")
    if not side.exists():
        raise CheckpointMismatch(f"missing config sidecar {side}")
    return VqMauConfig.from_dict(json.loads(side.read_text()))


def load_model(path, seed: int = 0):
    from .net import VqMauModel

    cfg = load_config(path)
    model = VqMauModel(cfg, seed=seed)
    try:
        model.load_state_dict(load_checkpoint(path))
    except (KeyError, ValueError) as e:
        raise CheckpointMismatch(str(e)) from None
    return model, cfg
