"""VQ-MaU: a U-shaped network of NVSS blocks with a vector-quantized bottleneck.

Inputs and outputs are images in (N, C, H, W) layout; every stage in between
works on (N, h, w, c) token maps.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import tensor as T
from .errors import ConfigMismatch, Indivisible, OddChannels, OddExtent
from .module import BatchNorm2d, Conv2d, DepthwiseConv2d, LayerNorm, Linear, Module
from .scan import DEFAULT_CHUNK, ScanParams, ss2d
from .tensor import Tensor
from .vq import Codebook, QuantizeResult


@dataclass
class VqMauConfig:
    in_channels: int = 16
    out_channels: int = 1
    base_channels: int = 64
    depth: int = 4
    blocks: tuple[int, ...] = (1, 1, 1, 1)
    height: int = 256
    width: int = 256
    codebook_size: int = 512
    code_dim: int | None = None      # defaults to the bottleneck channel count
    d_state: int = 16
    ssm_ratio: float = 2.0
    patch_size: int = 4
    scan_chunk: int = DEFAULT_CHUNK
    dtype: str = "float32"

    def __post_init__(self):
        self.blocks = tuple(int(b) for b in self.blocks)
        if self.code_dim is None:
            self.code_dim = self.bottleneck_channels
        self.validate()

    @property
    def channels(self) -> list[int]:
        return [self.base_channels * 2 ** i for i in range(self.depth)]

    @property
    def bottleneck_channels(self) -> int:
        return self.base_channels * 2 ** (self.depth - 1)

    @property
    def bottleneck_size(self) -> tuple[int, int]:
        f = self.patch_size * 2 ** (self.depth - 1)
        return self.height // f, self.width // f

    def validate(self) -> None:
        if self.depth < 1:
            raise ConfigMismatch("depth must be >= 1")
        if len(self.blocks) != self.depth or min(self.blocks) < 1:
            raise ConfigMismatch(f"blocks {self.blocks} must list {self.depth} counts >= 1")
        if self.patch_size != 4:
            raise ConfigMismatch("patch_size must be 4: the final projection upsamples by 4")
        f = self.patch_size * 2 ** (self.depth - 1)
        if self.height % f or self.width % f:
            raise ConfigMismatch(f"resolution {self.height}x{self.width} must be divisible by {f}")
        if self.code_dim != self.bottleneck_channels:
            raise ConfigMismatch(
                f"code_dim {self.code_dim} must equal bottleneck channels {self.bottleneck_channels}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigMismatch(f"dtype {self.dtype!r} not supported")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = list(self.blocks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VqMauConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def to_tokens(x: Tensor) -> Tensor:
    return x.transpose(0, 2, 3, 1)


def to_image(x: Tensor) -> Tensor:
    return x.transpose(0, 3, 1, 2)


class PatchEmbed(Module):
    """Non-overlapping p x p patches linearly mapped to ``dim`` channels."""

    def __init__(self, rng, c_in: int, dim: int = 64, patch: int = 4, dtype=np.float32):
        super().__init__()
        self.proj = Conv2d(rng, c_in, dim, patch, stride=patch, dtype=dtype)
        self.patch = patch

    def forward(self, x: Tensor) -> Tensor:
        h, w = x.shape[-2:]
        if h % self.patch or w % self.patch:
            raise Indivisible(f"{h}x{w} input is not divisible into {self.patch}x{self.patch} patches")
        return to_tokens(self.proj(x))


class PatchMerge(Module):
    """(h, w, c) -> (h/2, w/2, 2c): gather each 2x2 neighbourhood, normalize, project."""

    def __init__(self, rng, dim: int, dtype=np.float32):
        super().__init__()
        self.norm = LayerNorm(4 * dim, dtype=dtype)
        self.reduction = Linear(rng, 4 * dim, 2 * dim, bias=False, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise OddExtent(f"patch merge needs even extents, got {h}x{w}")
        # neighbourhood order: (0,0), (1,0), (0,1), (1,1) in (row, col) offsets
        x = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 4, 2, 5)
        x = x.reshape(n, h // 2, w // 2, 4 * c)
        return self.reduction(self.norm(x))


class PatchExpand(Module):
    """(h, w, c) -> (2h, 2w, c/2): project to 2c, unfold channel groups into 2x2 blocks."""

    def __init__(self, rng, dim: int, dtype=np.float32):
        super().__init__()
        if dim % 2:
            raise OddChannels(f"patch expand needs an even channel count, got {dim}")
        self.expand = Linear(rng, dim, 2 * dim, bias=False, dtype=dtype)
        self.dim = dim

    def forward(self, x: Tensor) -> Tensor:
        n, h, w, c = x.shape
        if c % 2:
            raise OddChannels(f"patch expand needs an even channel count, got {c}")
        x = self.expand(x)
        x = x.reshape(n, h, w, 2, 2, c // 2).transpose(0, 1, 3, 2, 4, 5)
        return x.reshape(n, 2 * h, 2 * w, c // 2)


class SS2D(Module):
    def __init__(self, rng, dim: int, d_state: int = 16, chunk: int = DEFAULT_CHUNK, dtype=np.float32):
        super().__init__()
        for name, value in ScanParams.init(rng, dim, d_state, dtype=dtype).tensors().items():
            setattr(self, name, value)
        self.chunk = chunk

    @property
    def params(self) -> ScanParams:
        return ScanParams(**{f.name: getattr(self, f.name) for f in fields(ScanParams)})

    def forward(self, x: Tensor) -> Tensor:
        return ss2d(x, self.params, chunk=self.chunk)


class VSS(Module):
    """Gated SS2D sub-block with its own residual connection."""

    def __init__(self, rng, dim: int, d_state: int = 16, ratio: float = 2.0,
                 chunk: int = DEFAULT_CHUNK, dtype=np.float32):
        super().__init__()
        inner = int(ratio * dim)
        self.norm = LayerNorm(dim, dtype=dtype)
        self.in_scan = Linear(rng, dim, inner, dtype=dtype)
        self.in_gate = Linear(rng, dim, inner, dtype=dtype)
        self.dwconv = DepthwiseConv2d(rng, inner, 3, dtype=dtype)
        self.ss2d = SS2D(rng, inner, d_state, chunk, dtype=dtype)
        self.out_norm = LayerNorm(inner, dtype=dtype)
        self.out = Linear(rng, inner, dim, dtype=dtype)

    def scan_branch(self, z: Tensor) -> Tensor:
        a = self.in_scan(z)
        a = to_tokens(self.dwconv(to_image(a)))
        return self.out_norm(self.ss2d(T.silu(a)))

    def forward(self, x: Tensor) -> Tensor:
        z = self.norm(x)
        gate = T.silu(self.in_gate(z))
        return x + self.out(self.scan_branch(z) * gate)


class NonNegativeEnhance(Module):
    """LayerNorm -> linear -> ReLU -> 3x3 conv -> BatchNorm (pre-activation order)."""

    def __init__(self, rng, dim: int, dtype=np.float32):
        super().__init__()
        self.norm = LayerNorm(dim, dtype=dtype)
        self.proj = Linear(rng, dim, dim, dtype=dtype)
        self.conv = Conv2d(rng, dim, dim, 3, pad=1, dtype=dtype)
        self.bn = BatchNorm2d(dim, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        x = T.relu(self.proj(self.norm(x)))
        return to_tokens(self.bn(self.conv(to_image(x))))


class NVSSBlock(Module):
    """Two passes through the same VSS -> NE pair; only the second pass is residual."""

    def __init__(self, rng, dim: int, d_state: int = 16, ratio: float = 2.0,
                 chunk: int = DEFAULT_CHUNK, dtype=np.float32):
        super().__init__()
        self.vss = VSS(rng, dim, d_state, ratio, chunk, dtype=dtype)
        self.ne = NonNegativeEnhance(rng, dim, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        first = self.ne(self.vss(x))
        return self.ne(self.vss(first)) + first


class FinalProjection(Module):
    """Two 2x patch expansions followed by a per-pixel linear map to the output channels."""

    def __init__(self, rng, dim: int, c_out: int, dtype=np.float32):
        super().__init__()
        self.up1 = PatchExpand(rng, dim, dtype=dtype)
        self.up2 = PatchExpand(rng, dim // 2, dtype=dtype)
        self.head = Linear(rng, dim // 4, c_out, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return to_image(self.head(self.up2(self.up1(x))))


class VqMauModel(Module):
    def __init__(self, config: VqMauConfig, seed: int = 0):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(seed)
        dt = np.dtype(config.dtype).type
        ch = config.channels
        kw = dict(d_state=config.d_state, ratio=config.ssm_ratio, chunk=config.scan_chunk, dtype=dt)
        self.patch_embed = PatchEmbed(rng, config.in_channels, ch[0], config.patch_size, dtype=dt)
        self.encoder = [[NVSSBlock(rng, ch[i], **kw) for _ in range(config.blocks[i])]
                        for i in range(config.depth)]
        self.merges = [PatchMerge(rng, ch[i], dtype=dt) for i in range(config.depth - 1)]
        self.codebook = Codebook(rng, config.codebook_size, config.code_dim, dtype=dt)
        rev = list(reversed(range(config.depth)))
        self.expands = [PatchExpand(rng, ch[i + 1], dtype=dt) for i in rev[1:]]
        self.decoder = [[NVSSBlock(rng, ch[i], **kw) for _ in range(config.blocks[i])] for i in rev]
        self.final = FinalProjection(rng, ch[0], config.out_channels, dtype=dt)
        self.last_quant: QuantizeResult | None = None

    def _children(self):
        for name, value in super()._children():
            if name in ("encoder", "decoder"):
                yield name, [b for stage in value for b in stage]
            elif name not in ("config", "last_quant"):
                yield name, value

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """(N, C_in, H, W) -> ((N, C_out, H, W) output, VQ loss)."""
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2:] != (cfg.height, cfg.width):
            raise ConfigMismatch(
                f"input {x.shape} does not match (N, {cfg.in_channels}, {cfg.height}, {cfg.width})")
        h = self.patch_embed(x)
        skips = []
        for i, stage in enumerate(self.encoder):
            for block in stage:
                h = block(h)
            skips.append(h)
            if i < cfg.depth - 1:
                h = self.merges[i](h)
        quant = self.codebook(h)
        self.last_quant = quant
        h = quant.z_q
        for j, stage in enumerate(self.decoder):
            if j > 0:
                h = self.expands[j - 1](h) + skips[cfg.depth - 1 - j]
            for block in stage:
                h = block(h)
        return self.final(h), quant.vq_loss

    def stage_shapes(self, batch: int = 1) -> list[tuple[int, ...]]:
        """Token-map shapes (N, h, w, c) of every encoder stage, from the config alone."""
        cfg = self.config
        h, w = cfg.height // cfg.patch_size, cfg.width // cfg.patch_size
        return [(batch, h >> i, w >> i, c) for i, c in enumerate(cfg.channels)]
