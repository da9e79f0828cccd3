"""Selective-scan recurrence and the four-direction 2D scan built on it.

Per channel d and state index s the recurrence is

    h_l = exp(delta_l * A) * h_{l-1} + delta_l * B_l * u_l
    y_l = <C_l, h_l> + d_skip * u_l,          A = -exp(a_log)

Shapes: u, delta (..., L, D); a_log (..., D, S); b, c (..., L, S); d_skip (..., D).
Leading dimensions broadcast, so batches and scan directions share one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import NonpositiveDelta, ShapeMismatch
from .tensor import Tensor, _unbroadcast, primitive

DEFAULT_CHUNK = 16
DEFAULT_SEGMENT = 256
DIRECTIONS = ("row-forward", "row-backward", "col-forward", "col-backward")


def _check(u, delta, a_log, b, c, d_skip):
    if u.ndim < 2 or delta.shape != u.shape:
        raise ShapeMismatch(f"u {u.shape} and delta {delta.shape} must match as (..., L, D)")
    L, D = u.shape[-2:]
    if a_log.ndim < 2 or a_log.shape[-2] != D:
        raise ShapeMismatch(f"a_log {a_log.shape} must be (..., D={D}, S)")
    S = a_log.shape[-1]
    for name, arr in (("b", b), ("c", c)):
        if arr.ndim < 2 or arr.shape[-2:] != (L, S):
            raise ShapeMismatch(f"{name} {arr.shape} must be (..., L={L}, S={S})")
    if d_skip.shape[-1:] != (D,):
        raise ShapeMismatch(f"d_skip {d_skip.shape} must end in D={D}")
    if np.any(delta <= 0):
        raise NonpositiveDelta("delta must be strictly positive")


def selective_scan_naive(u, delta, a_log, b, c, d_skip):
    """Strictly sequential reference: one recurrence step per sequence position."""
    u, delta, a_log, b, c, d_skip = (np.asarray(v) for v in (u, delta, a_log, b, c, d_skip))
    _check(u, delta, a_log, b, c, d_skip)
    A = -np.exp(a_log)
    L = u.shape[-2]
    lead = np.broadcast_shapes(u.shape[:-2], a_log.shape[:-2], b.shape[:-2])
    h = np.zeros(lead + A.shape[-2:], dtype=u.dtype)
    y = np.empty(lead + u.shape[-2:], dtype=u.dtype)
    for l in range(L):
        dl = delta[..., l, :]
        a_bar = np.exp(dl[..., None] * A)
        bx = (dl * u[..., l, :])[..., None] * b[..., l, None, :]
        h = a_bar * h + bx
        y[..., l, :] = (h * c[..., l, None, :]).sum(-1) + d_skip * u[..., l, :]
    return y


def linear_scan(a_bar: np.ndarray, x: np.ndarray, chunk: int = DEFAULT_CHUNK,
                h0: np.ndarray | None = None) -> np.ndarray:
    """All states of h_l = a_bar_l * h_{l-1} + x_l along axis -3, starting from
    ``h0`` (zero when omitted).

    The sequence is cut into chunks of length ``chunk``. A first pass runs every
    chunk from a zero entry state (all chunks at once) while accumulating the
    chunk's decay product; the true entry state of each chunk is then carried
    across chunk boundaries, and a second pass re-runs the chunks from those
    entry states, recording every state.
    """
    L = x.shape[-3]
    q = max(1, min(int(chunk), L))
    nc = -(-L // q)
    extra = nc * q - L
    lead = x.shape[:-3]
    tail = x.shape[-2:]
    if extra:
        widths = [(0, 0)] * x.ndim
        widths[-3] = (0, extra)
        a_bar = np.pad(a_bar, widths, constant_values=1)
        x = np.pad(x, widths)
    a = a_bar.reshape(lead + (nc, q) + tail)
    xs = x.reshape(lead + (nc, q) + tail)
    h = np.zeros(lead + (nc,) + tail, dtype=x.dtype)
    start = np.zeros(lead + tail, dtype=x.dtype) if h0 is None else np.broadcast_to(h0, lead + tail)
    if nc > 1:
        decay = np.ones_like(h)
        for i in range(q):
            ai = a[..., i, :, :]
            h *= ai
            h += xs[..., i, :, :]
            decay *= ai
        entry = np.empty_like(h)
        carry = start
        for k in range(nc):
            entry[..., k, :, :] = carry
            carry = h[..., k, :, :] + decay[..., k, :, :] * carry
        h = entry
    elif h0 is not None:
        h = start[..., None, :, :]
    states = np.empty_like(xs)
    for i in range(q):
        h = a[..., i, :, :] * h + xs[..., i, :, :]
        states[..., i, :, :] = h
    out = states.reshape(lead + (nc * q,) + tail)
    return out[..., :L, :, :] if extra else out


def _states(u, delta, A, b, chunk):
    a_bar = np.exp(delta[..., None] * A[..., None, :, :])
    bx = (delta * u)[..., None] * b[..., None, :]
    return a_bar, linear_scan(a_bar, bx, chunk)


def selective_scan_fast(u, delta, a_log, b, c, d_skip, chunk: int = DEFAULT_CHUNK,
                        segment: int = DEFAULT_SEGMENT):
    """Chunked evaluation of the same recurrence as ``selective_scan_naive``.

    The sequence is streamed in segments of ``segment`` positions whose final
    state seeds the next one, so temporaries stay a fixed size and the cost per
    position does not depend on L.
    """
    u, delta, a_log, b, c, d_skip = (np.asarray(v) for v in (u, delta, a_log, b, c, d_skip))
    _check(u, delta, a_log, b, c, d_skip)
    A = -np.exp(a_log)
    L = u.shape[-2]
    lead = np.broadcast_shapes(u.shape[:-2], a_log.shape[:-2], b.shape[:-2], c.shape[:-2])
    y = np.empty(lead + u.shape[-2:], dtype=u.dtype)
    seg = max(int(segment), 1)
    h = None
    for s0 in range(0, L, seg):
        sl = slice(s0, min(s0 + seg, L))
        a_bar = np.exp(delta[..., sl, :, None] * A[..., None, :, :])
        bx = (delta[..., sl, :] * u[..., sl, :])[..., None] * b[..., sl, None, :]
        hs = linear_scan(a_bar, bx, chunk, h0=h)
        y[..., sl, :] = (hs * c[..., sl, None, :]).sum(-1) + d_skip[..., None, :] * u[..., sl, :]
        h = hs[..., -1, :, :]
    return y


@primitive("selective_scan")
def _selective_scan(u, delta, a_log, b, c, d_skip, impl="fast", chunk=DEFAULT_CHUNK):
    if impl == "naive":
        y = selective_scan_naive(u, delta, a_log, b, c, d_skip)
    else:
        y = selective_scan_fast(u, delta, a_log, b, c, d_skip, chunk=chunk)

    def vjp(gy):
        # states are recomputed rather than stored by the forward pass
        A = -np.exp(a_log)
        a_bar, h = _states(u, delta, A, b, chunk)
        gd = gy[..., None] * c[..., None, :]
        a_next = np.ones_like(a_bar)
        a_next[..., :-1, :, :] = a_bar[..., 1:, :, :]
        gh = np.flip(linear_scan(np.flip(a_next, -3), np.flip(gd, -3), chunk), -3)
        h_prev = np.zeros_like(h)
        h_prev[..., 1:, :, :] = h[..., :-1, :, :]
        g_la = gh * h_prev * a_bar
        ghb = (gh * b[..., None, :]).sum(-1)
        g_u = ghb * delta + d_skip[..., None, :] * gy
        g_delta = (g_la * A[..., None, :, :]).sum(-1) + ghb * u
        g_a_log = _unbroadcast((g_la * delta[..., None]).sum(-3), a_log.shape) * A
        g_b = _unbroadcast((gh * (delta * u)[..., None]).sum(-2), b.shape)
        g_c = _unbroadcast((gy[..., None] * h).sum(-2), c.shape)
        g_d = _unbroadcast((gy * u).sum(-2), d_skip.shape)
        return (_unbroadcast(g_u, u.shape), _unbroadcast(g_delta, delta.shape),
                g_a_log, g_b, g_c, g_d)
    return y, vjp


def selective_scan(u: Tensor, delta: Tensor, a_log: Tensor, b: Tensor, c: Tensor,
                   d_skip: Tensor, impl: str = "fast", chunk: int = DEFAULT_CHUNK) -> Tensor:
    """Differentiable selective scan on the tape."""
    return T.apply_primitive("selective_scan", u, delta, a_log, b, c, d_skip,
                             impl=impl, chunk=chunk)


# ---------------------------------------------------------------------------
# 2D traversal
# ---------------------------------------------------------------------------

def flatten_direction(x: Tensor, direction: str) -> Tensor:
    """(B, H, W, D) feature map -> (B, H*W, D) sequence in the given order."""
    n, h, w, d = x.shape
    if direction.startswith("row"):
        seq = x.reshape(n, h * w, d)
    elif direction.startswith("col"):
        seq = x.transpose(0, 2, 1, 3).reshape(n, h * w, d)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if direction.endswith("backward"):
        seq = T.reverse(seq, axis=1)
    return seq


def unflatten_direction(seq: Tensor, direction: str, h: int, w: int) -> Tensor:
    n, L, d = seq.shape
    if L != h * w:
        raise ShapeMismatch(f"sequence length {L} != {h}x{w}")
    if direction.endswith("backward"):
        seq = T.reverse(seq, axis=1)
    if direction.startswith("row"):
        return seq.reshape(n, h, w, d)
    return seq.reshape(n, w, h, d).transpose(0, 2, 1, 3)


@dataclass
class ScanParams:
    """Scan weights for all four directions, stacked on a leading axis of size 4.

    Delta uses a low-rank projection (D -> rank -> D) followed by softplus.
    """

    a_log: Tensor         # (4, D, S)
    d_skip: Tensor        # (4, D)
    w_delta_down: Tensor  # (4, D, R)
    w_delta_up: Tensor    # (4, R, D)
    delta_bias: Tensor    # (4, D)
    w_b: Tensor           # (4, D, S)
    w_c: Tensor           # (4, D, S)

    @classmethod
    def init(cls, rng: np.random.Generator, d: int, d_state: int = 16, rank: int | None = None,
             dt_min: float = 1e-3, dt_max: float = 0.1, dtype=np.float32) -> "ScanParams":
        k = len(DIRECTIONS)
        rank = rank or max(1, -(-d // 16))
        a_log = np.log(np.tile(np.arange(1, d_state + 1, dtype=np.float64), (k, d, 1)))
        dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=(k, d)))
        inv_softplus = dt + np.log(-np.expm1(-dt))
        lim_down = d ** -0.5
        lim_up = rank ** -0.5
        p = T.parameter
        return cls(
            a_log=p(a_log.astype(dtype)),
            d_skip=p(np.ones((k, d), dtype)),
            w_delta_down=p(rng.uniform(-lim_down, lim_down, (k, d, rank)).astype(dtype)),
            w_delta_up=p(rng.uniform(-lim_up, lim_up, (k, rank, d)).astype(dtype)),
            delta_bias=p(inv_softplus.astype(dtype)),
            w_b=p(rng.uniform(-lim_down, lim_down, (k, d, d_state)).astype(dtype)),
            w_c=p(rng.uniform(-lim_down, lim_down, (k, d, d_state)).astype(dtype)),
        )

    def tensors(self) -> dict[str, Tensor]:
        return dict(vars(self))


def ss2d(x: Tensor, params: ScanParams, impl: str = "fast", chunk: int = DEFAULT_CHUNK) -> Tensor:
    """Scan a (B, H, W, D) map along four traversal orders and sum the results."""
    if x.ndim != 4:
        raise ShapeMismatch(f"ss2d expects (B, H, W, D), got {x.shape}")
    n, h, w, d = x.shape
    k, d_p, s = params.a_log.shape
    if d_p != d or k != len(DIRECTIONS):
        raise ShapeMismatch(f"scan params for D={d_p}, K={k} applied to D={d}")
    r = params.w_delta_down.shape[-1]
    xs = T.stack([flatten_direction(x, dr) for dr in DIRECTIONS], axis=0)
    low = xs @ params.w_delta_down.reshape(k, 1, d, r)
    delta = T.softplus(low @ params.w_delta_up.reshape(k, 1, r, d)
                       + params.delta_bias.reshape(k, 1, 1, d))
    bm = xs @ params.w_b.reshape(k, 1, d, s)
    cm = xs @ params.w_c.reshape(k, 1, d, s)
    y = selective_scan(xs, delta, params.a_log.reshape(k, 1, d, s), bm, cm,
                       params.d_skip.reshape(k, 1, d), impl=impl, chunk=chunk)
    out = None
    for i, dr in enumerate(DIRECTIONS):
        part = unflatten_direction(y[i], dr, h, w)
        out = part if out is None else out + part
    return out
