"""Image file I/O, preprocessing to network input space, and bilinear resizing.

Raw images are uint8 RGB arrays of shape (height, width, 3). Two file formats
are supported without external codecs: binary PPM (P6, maxval 255), which
round-trips losslessly, and 8-bit PNG (grayscale, RGB, palette and alpha
variants decode to RGB; encoding writes RGB, color type 2, filter 0).
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ImageFormatError, ShapeMismatchError

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _as_raw(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ShapeMismatchError(
            f"raw image must be uint8 (H, W, 3); got {img.dtype} {img.shape}"
        )
    return img


# ---------------------------------------------------------------------------
# PPM (P6, binary, maxval 255)

def _read_ppm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":  # comment runs to end of line
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageFormatError("PPM header ended unexpectedly")
    return data[start:pos], pos


def load_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise ImageFormatError(f"{path}: not a binary PPM (missing P6 magic)")
    pos = 2
    try:
        w_tok, pos = _read_ppm_token(data, pos)
        h_tok, pos = _read_ppm_token(data, pos)
        max_tok, pos = _read_ppm_token(data, pos)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except (ValueError, ImageFormatError) as exc:
        raise ImageFormatError(f"{path}: malformed PPM header ({exc})") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported PPM maxval {maxval} (need 255)")
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: invalid PPM dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    pixels = data[pos : pos + expected]
    if len(pixels) != expected:
        raise ImageFormatError(
            f"{path}: PPM payload has {len(pixels)} bytes, expected {expected}"
        )
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3).copy()


def save_ppm(path, img) -> None:
    img = _as_raw(img)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


# ---------------------------------------------------------------------------
# PNG (8-bit, non-interlaced)

def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(raw: bytes, height: int, stride: int, bpp: int, path) -> bytearray:
    out = bytearray(height * stride)
    pos = 0
    for row in range(height):
        if pos >= len(raw):
            raise ImageFormatError(f"{path}: PNG pixel data ends early at row {row}")
        ftype = raw[pos]
        pos += 1
        line = bytearray(raw[pos : pos + stride])
        if len(line) != stride:
            raise ImageFormatError(f"{path}: PNG row {row} is short")
        pos += stride
        prev_start = (row - 1) * stride
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif ftype == 2:  # Up
            if row > 0:
                for i in range(stride):
                    line[i] = (line[i] + out[prev_start + i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up = out[prev_start + i] if row > 0 else 0
                line[i] = (line[i] + ((left + up) >> 1)) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up = out[prev_start + i] if row > 0 else 0
                ul = out[prev_start + i - bpp] if (row > 0 and i >= bpp) else 0
                line[i] = (line[i] + _paeth(left, up, ul)) & 0xFF
        else:
            raise ImageFormatError(f"{path}: PNG row {row} uses unknown filter {ftype}")
        out[row * stride : (row + 1) * stride] = line
    return out


def load_png(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(_PNG_SIGNATURE):
        raise ImageFormatError(f"{path}: missing PNG signature")
    pos = len(_PNG_SIGNATURE)
    header = None
    palette = None
    idat = bytearray()
    while pos + 8 <= len(data):
        length, ctype = struct.unpack(">I4s", data[pos : pos + 8])
        chunk = data[pos + 8 : pos + 8 + length]
        if len(chunk) != length or pos + 12 + length > len(data):
            raise ImageFormatError(f"{path}: truncated PNG chunk {ctype!r}")
        (crc,) = struct.unpack(">I", data[pos + 8 + length : pos + 12 + length])
        if crc != zlib.crc32(chunk, zlib.crc32(ctype)):
            raise ImageFormatError(f"{path}: CRC mismatch in PNG chunk {ctype!r}")
        pos += 12 + length
        if ctype == b"IHDR":
            header = struct.unpack(">IIBBBBB", chunk)
        elif ctype == b"PLTE":
            palette = np.frombuffer(chunk, dtype=np.uint8).reshape(-1, 3)
        elif ctype == b"IDAT":
            idat.extend(chunk)
        elif ctype == b"IEND":
            break
    if header is None:
        raise ImageFormatError(f"{path}: PNG has no IHDR chunk")
    width, height, depth, color, compression, filt, interlace = header
    if depth != 8:
        raise ImageFormatError(f"{path}: unsupported PNG bit depth {depth} (need 8)")
    if compression != 0 or filt != 0:
        raise ImageFormatError(f"{path}: nonstandard PNG compression/filter method")
    if interlace != 0:
        raise ImageFormatError(f"{path}: interlaced PNG is not supported")
    channels = {0: 1, 2: 3, 3: 1, 4: 2, 6: 4}.get(color)
    if channels is None:
        raise ImageFormatError(f"{path}: unsupported PNG color type {color}")
    if not idat:
        raise ImageFormatError(f"{path}: PNG has no IDAT data")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise ImageFormatError(f"{path}: PNG deflate stream is corrupt ({exc})") from exc
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise ImageFormatError(
            f"{path}: PNG pixel data has {len(raw)} bytes, expected {height * (stride + 1)}"
        )
    flat = _unfilter(raw, height, stride, channels, path)
    pixels = np.frombuffer(bytes(flat), dtype=np.uint8).reshape(height, width, channels)
    if color == 0:
        return np.repeat(pixels, 3, axis=2)
    if color == 2:
        return pixels.copy()
    if color == 3:
        if palette is None:
            raise ImageFormatError(f"{path}: palette PNG is missing its PLTE chunk")
        index = pixels[:, :, 0]
        if index.max() >= len(palette):
            raise ImageFormatError(f"{path}: PNG palette index out of range")
        return palette[index]
    if color == 4:
        return np.repeat(pixels[:, :, :1], 3, axis=2)
    return pixels[:, :, :3].copy()  # RGBA: alpha dropped


def _png_chunk(ctype: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + ctype
        + payload
        + struct.pack(">I", zlib.crc32(payload, zlib.crc32(ctype)))
    )


def save_png(path, img) -> None:
    img = _as_raw(img)
    h, w = img.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    rows = img.tobytes()
    stride = w * 3
    filtered = b"".join(
        b"\x00" + rows[r * stride : (r + 1) * stride] for r in range(h)
    )
    with open(path, "wb") as fh:
        fh.write(_PNG_SIGNATURE)
        fh.write(_png_chunk(b"IHDR", ihdr))
        fh.write(_png_chunk(b"IDAT", zlib.compress(filtered, 9)))
        fh.write(_png_chunk(b"IEND", b""))


# ---------------------------------------------------------------------------
# Dispatch, preprocessing, resizing

def load_image(path) -> np.ndarray:
    """Load a PPM or PNG file (decided by content, not extension) as uint8 RGB."""
    p = Path(path)
    if not p.is_file():
        raise ImageFormatError(f"{path}: no such file")
    head = p.read_bytes()[:8]
    if head.startswith(b"P6"):
        return load_ppm(path)
    if head.startswith(_PNG_SIGNATURE):
        return load_png(path)
    raise ImageFormatError(f"{path}: neither binary PPM nor PNG")


def save_image(path, img) -> None:
    """Save uint8 RGB as PPM or PNG depending on the file extension."""
    suffix = Path(path).suffix.lower()
    if suffix == ".ppm":
        save_ppm(path, img)
    elif suffix == ".png":
        save_png(path, img)
    else:
        raise ImageFormatError(f"{path}: unsupported output extension {suffix!r}")


def preprocess(img, mean) -> np.ndarray:
    """uint8 (H, W, 3) to float64 (3, H, W) with the per-channel mean subtracted."""
    img = _as_raw(img)
    mean = np.asarray(mean, dtype=np.float64)
    if mean.shape != (3,):
        raise ShapeMismatchError(f"channel mean must have 3 entries, got shape {mean.shape}")
    return img.astype(np.float64).transpose(2, 0, 1) - mean[:, None, None]


def deprocess(tensor, mean) -> np.ndarray:
    """Inverse of preprocess: add the mean, clamp to [0, 255], round half to even."""
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 3 or tensor.shape[0] != 3:
        raise ShapeMismatchError(f"expected a (3, H, W) tensor, got {tensor.shape}")
    mean = np.asarray(mean, dtype=np.float64)
    values = tensor + mean[:, None, None]
    values = np.clip(np.rint(values), 0.0, 255.0)
    return values.transpose(1, 2, 0).astype(np.uint8)


def _axis_coords(new_size: int, old_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel-center alignment: dst center maps to src center.
    scale = old_size / new_size
    src = (np.arange(new_size) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, old_size - 1.0)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, old_size - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(img, new_h: int, new_w: int) -> np.ndarray:
    """Separable bilinear resize with half-pixel-center alignment."""
    img = _as_raw(img)
    if new_h < 1 or new_w < 1:
        raise ShapeMismatchError(f"target size {new_h}x{new_w} must be at least 1x1")
    h, w = img.shape[:2]
    if (new_h, new_w) == (h, w):
        return img.copy()
    values = img.astype(np.float64)
    row_lo, row_hi, row_frac = _axis_coords(new_h, h)
    col_lo, col_hi, col_frac = _axis_coords(new_w, w)
    rows = values[row_lo] * (1.0 - row_frac)[:, None, None] + values[row_hi] * row_frac[:, None, None]
    out = rows[:, col_lo] * (1.0 - col_frac)[None, :, None] + rows[:, col_hi] * col_frac[None, :, None]
    return np.clip(np.rint(out), 0.0, 255.0).astype(np.uint8)
