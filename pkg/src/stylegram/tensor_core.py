"""Dense tensor primitives: 2D convolution, pooling, ReLU and their adjoints.

Feature tensors are float64 numpy arrays of shape (channels, height, width),
row-major. Plane operations (full/valid cross-correlation) work on 2D arrays.
All functions are pure and deterministic; every adjoint is the exact
derivative-propagating counterpart of its forward operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeMismatchError

# Primitive invocation counters, used by tests to observe lazy evaluation.
OP_COUNTS = {"conv2d": 0, "conv2d_input_grad": 0, "pool2d": 0, "relu": 0}


def reset_op_counts() -> None:
    for key in OP_COUNTS:
        OP_COUNTS[key] = 0


def _as_f64(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def conv2d(x, kernels, bias=None, stride: int = 1, padding: str = "valid") -> np.ndarray:
    """Multi-channel 2D cross-correlation.

    x: (C, H, W); kernels: (O, C, kh, kw); bias: (O,) or None.
    padding "valid" uses no padding; "same" zero-pads by (k-1)/2 on each side
    (odd kernels only) so that stride-1 output matches the input size.
    """
    OP_COUNTS["conv2d"] += 1
    x = _as_f64(x)
    kernels = _as_f64(kernels)
    if x.ndim != 3 or kernels.ndim != 4:
        raise ShapeMismatchError(
            f"conv2d expects input (C,H,W) and kernels (O,C,kh,kw); got {x.shape} and {kernels.shape}"
        )
    out_ch, in_ch, kh, kw = kernels.shape
    if x.shape[0] != in_ch:
        raise ShapeMismatchError(
            f"conv2d input has {x.shape[0]} channels but kernels expect {in_ch}"
        )
    if stride < 1:
        raise ShapeMismatchError(f"conv2d stride must be >= 1, got {stride}")
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeMismatchError("'same' padding requires odd kernel sizes")
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
        x = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    elif padding != "valid":
        raise ShapeMismatchError(f"unknown padding mode {padding!r}")
    if x.shape[1] < kh or x.shape[2] < kw:
        raise ShapeMismatchError(
            f"conv2d input spatial dims {x.shape[1:]} smaller than kernel {(kh, kw)}"
        )
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.tensordot(kernels, windows, axes=([1, 2, 3], [0, 3, 4]))
    if bias is not None:
        bias = _as_f64(bias)
        if bias.shape != (out_ch,):
            raise ShapeMismatchError(
                f"conv2d bias shape {bias.shape} does not match {out_ch} output channels"
            )
        out = out + bias[:, None, None]
    return out


def conv2d_input_grad(
    upstream,
    kernels,
    stride: int = 1,
    padding: str = "valid",
    input_hw: tuple[int, int] | None = None,
) -> np.ndarray:
    """Adjoint of conv2d with respect to its input.

    upstream: (O, Ho, Wo) gradient at the conv output. input_hw pins the input
    spatial size; it is required when stride > 1 (several input sizes can map
    to the same output size) and inferred otherwise.
    """
    OP_COUNTS["conv2d_input_grad"] += 1
    upstream = _as_f64(upstream)
    kernels = _as_f64(kernels)
    out_ch, in_ch, kh, kw = kernels.shape
    if upstream.ndim != 3 or upstream.shape[0] != out_ch:
        raise ShapeMismatchError(
            f"upstream shape {upstream.shape} does not match {out_ch} output channels"
        )
    ho, wo = upstream.shape[1:]
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeMismatchError("'same' padding requires odd kernel sizes")
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
    elif padding == "valid":
        ph = pw = 0
    else:
        raise ShapeMismatchError(f"unknown padding mode {padding!r}")
    if input_hw is None:
        if stride != 1:
            raise ShapeMismatchError("conv2d_input_grad needs input_hw when stride > 1")
        input_hw = (ho + kh - 1 - 2 * ph, wo + kw - 1 - 2 * pw)
    h, w = input_hw
    hp, wp = h + 2 * ph, w + 2 * pw
    if (hp - kh) // stride + 1 != ho or (wp - kw) // stride + 1 != wo:
        raise ShapeMismatchError(
            f"upstream spatial dims {(ho, wo)} inconsistent with input {(h, w)}"
        )
    # (Ho, Wo, C, kh, kw): per-output-pixel contribution to each window element
    cols = np.tensordot(upstream, kernels, axes=([0], [0]))
    grad = np.zeros((in_ch, hp, wp))
    for p in range(kh):
        for q in range(kw):
            grad[:, p : p + ho * stride : stride, q : q + wo * stride : stride] += (
                cols[:, :, :, p, q].transpose(2, 0, 1)
            )
    if ph or pw:
        grad = grad[:, ph : ph + h, pw : pw + w]
    return grad


def relu(x) -> np.ndarray:
    """Elementwise max(0, x)."""
    OP_COUNTS["relu"] += 1
    return np.maximum(_as_f64(x), 0.0)


def relu_grad(upstream, forward_input) -> np.ndarray:
    """Adjoint of relu: upstream masked where the forward input was positive."""
    upstream = _as_f64(upstream)
    forward_input = _as_f64(forward_input)
    if upstream.shape != forward_input.shape:
        raise ShapeMismatchError(
            f"relu_grad shapes differ: {upstream.shape} vs {forward_input.shape}"
        )
    return np.where(forward_input > 0.0, upstream, 0.0)


@dataclass
class PoolRecord:
    """Bookkeeping needed by pool2d_grad: geometry plus argmax indices (max mode)."""

    mode: str
    size: int
    stride: int
    input_shape: tuple[int, int, int]
    argmax: np.ndarray | None  # (C, Ho, Wo) flat index into the pooling window


def pool2d(x, mode: str = "max", size: int = 2, stride: int = 2) -> tuple[np.ndarray, PoolRecord]:
    """Max or average pooling over square windows. Returns (output, record)."""
    OP_COUNTS["pool2d"] += 1
    x = _as_f64(x)
    if mode not in ("max", "average"):
        raise ShapeMismatchError(f"unknown pooling mode {mode!r}")
    if size < 1 or stride < 1:
        raise ShapeMismatchError("pool2d size and stride must be >= 1")
    c, h, w = x.shape
    if h < size or w < size:
        raise ShapeMismatchError(f"pool2d input {x.shape[1:]} smaller than window {size}")
    windows = sliding_window_view(x, (size, size), axis=(1, 2))[:, ::stride, ::stride]
    flat = windows.reshape(windows.shape[:3] + (size * size,))
    if mode == "max":
        arg = flat.argmax(axis=3)
        out = np.take_along_axis(flat, arg[..., None], axis=3)[..., 0]
        record = PoolRecord(mode, size, stride, x.shape, arg)
    else:
        out = flat.mean(axis=3)
        record = PoolRecord(mode, size, stride, x.shape, None)
    return out, record


def pool2d_grad(upstream, record: PoolRecord) -> np.ndarray:
    """Adjoint of pool2d: routes upstream into the pooled windows."""
    upstream = _as_f64(upstream)
    c, h, w = record.input_shape
    size, stride = record.size, record.stride
    grad = np.zeros((c, h, w))
    ho, wo = upstream.shape[1:]
    if record.mode == "max":
        if record.argmax is None or upstream.shape != record.argmax.shape:
            raise ShapeMismatchError(
                f"upstream shape {upstream.shape} does not match pooling record"
            )
        ci, oi, oj = np.indices(upstream.shape)
        rows = oi * stride + record.argmax // size
        cols = oj * stride + record.argmax % size
        np.add.at(grad, (ci, rows, cols), upstream)
    else:
        share = upstream / float(size * size)
        for p in range(size):
            for q in range(size):
                grad[:, p : p + ho * stride : stride, q : q + wo * stride : stride] += share
    return grad


# Transient window-matrix copies are kept near 32 MB regardless of plane size.
_XCORR_BLOCK_ELEMENTS = 4_000_000


def valid_xcorr(big, small) -> np.ndarray:
    """Valid 2D cross-correlation: out[i,j] = sum_pq big[i+p, j+q] * small[p,q].

    Direct (non-FFT) evaluation: sliding windows contracted against the small
    plane in row blocks, so large planes cost O(Ho*Wo*Hs*Ws) flops at matrix
    speed without materializing the full window tensor.
    """
    big = _as_f64(big)
    small = _as_f64(small)
    if big.ndim != 2 or small.ndim != 2:
        raise ShapeMismatchError("valid_xcorr expects two 2D planes")
    if big.shape[0] < small.shape[0] or big.shape[1] < small.shape[1]:
        raise ShapeMismatchError(
            f"valid_xcorr: plane {small.shape} does not fit inside {big.shape}"
        )
    hs, ws = small.shape
    ho = big.shape[0] - hs + 1
    wo = big.shape[1] - ws + 1
    windows = sliding_window_view(big, (hs, ws))
    out = np.empty((ho, wo))
    rows = max(1, _XCORR_BLOCK_ELEMENTS // max(1, wo * hs * ws))
    for r in range(0, ho, rows):
        out[r : r + rows] = np.tensordot(windows[r : r + rows], small,
                                         axes=([2, 3], [0, 1]))
    return out


def full_xcorr(plane_a, plane_b) -> np.ndarray:
    """Full 2D cross-correlation of two equally sized planes.

    Output has shape (2X-1, 2Y-1); entry (dx + X - 1, dy + Y - 1) is
    sum_uv a(u,v) * b(u+dx, v+dy) with out-of-range samples treated as zero.
    For plane_a == plane_b this is the autocorrelation: centrally symmetric,
    with the squared norm at the center. Equivalent to sliding plane_a over a
    zero-extended plane_b.
    """
    plane_a = _as_f64(plane_a)
    plane_b = _as_f64(plane_b)
    if plane_a.ndim != 2 or plane_a.shape != plane_b.shape:
        raise ShapeMismatchError(
            f"full_xcorr expects two equally sized 2D planes; got {plane_a.shape} and {plane_b.shape}"
        )
    x, y = plane_a.shape
    padded = np.pad(plane_b, ((x - 1, x - 1), (y - 1, y - 1)))
    return valid_xcorr(padded, plane_a)
