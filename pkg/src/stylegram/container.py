"""Binary container for Gram-type arrays, sharing the weight file's framing.

Layout (little-endian): magic "GFG1"; u32 rank; rank u32 dims; payload as f32,
row-major. Rank distinguishes the representation: 2 for a global Gram matrix,
3 for spatial autocorrelation planes, 4 for pixelwise/localized Gram fields.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import WeightFormatError

_MAGIC = b"GFG1"


def save_array(path, array) -> None:
    array = np.asarray(array, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", array.ndim))
        fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
        fh.write(array.astype("<f4").tobytes())


def load_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise WeightFormatError(f"{path}: truncated gram container")
    if data[:4] != _MAGIC:
        raise WeightFormatError(f"{path}: bad magic {data[:4]!r}, expected {_MAGIC!r}")
    (rank,) = struct.unpack("<I", data[4:8])
    if rank < 1 or rank > 8:
        raise WeightFormatError(f"{path}: implausible rank {rank}")
    header_end = 8 + 4 * rank
    if len(data) < header_end:
        raise WeightFormatError(f"{path}: truncated gram container header")
    dims = struct.unpack(f"<{rank}I", data[8:header_end])
    count = int(np.prod(dims))
    payload = data[header_end:]
    if len(payload) != 4 * count:
        raise WeightFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {4 * count}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return values.reshape(dims)
