"""Image file and wire codecs: PFM depth, 16-bit PNG masks/depth, RGB PNG.

Disk formats serve the render CLI; the PNG byte codecs also carry
observations over the evaluation service's wire protocol. Depth travels as
16-bit millimeters (0 = miss or beyond 65.535 m), which is the canonical
sensor payload: equality checks compare these quantized arrays.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

DEPTH_MM_MAX = 65535


def write_pfm(path: str | Path, data: np.ndarray) -> None:
    """Grayscale PFM, float32 little-endian, rows bottom-to-top."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ValueError("PFM writer expects a 2D array")
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{data.shape[1]} {data.shape[0]}\n".encode("ascii"))
        fh.write(b"-1.0\n")  # negative scale marks little-endian
        fh.write(np.flipud(data).tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM")
        width, height = map(int, fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(width * height * 4), dtype=dtype)
    return np.flipud(data.reshape(height, width)).astype(np.float32)


def depth_to_millimeters(depth_m: np.ndarray) -> np.ndarray:
    """Quantize metric depth to uint16 millimeters; non-finite or
    out-of-range values become 0."""
    mm = np.floor(np.asarray(depth_m, dtype=np.float64) * 1000.0 + 0.5)
    mm = np.where(np.isfinite(mm) & (mm >= 1) & (mm <= DEPTH_MM_MAX), mm, 0)
    return mm.astype(np.uint16)


def encode_png_u16(data: np.ndarray) -> bytes:
    data = np.ascontiguousarray(data, dtype=np.uint16)
    buf = io.BytesIO()
    Image.fromarray(data, mode="I;16").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_u16(blob: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(blob))
    return np.asarray(img, dtype=np.uint16)


def encode_png_rgb(data: np.ndarray) -> bytes:
    data = np.ascontiguousarray(data, dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_rgb(blob: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(blob)).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def write_mask_png(path: str | Path, mask: np.ndarray) -> None:
    """Instance-id mask as 16-bit grayscale PNG (ids above 65535 rejected)."""
    mask = np.asarray(mask)
    if mask.min() < 0 or mask.max() > 65535:
        raise ValueError("mask ids must fit in uint16")
    Path(path).write_bytes(encode_png_u16(mask.astype(np.uint16)))


def read_mask_png(path: str | Path) -> np.ndarray:
    return decode_png_u16(Path(path).read_bytes()).astype(np.int32)


def write_depth_png(path: str | Path, depth_m: np.ndarray) -> None:
    """Depth as 16-bit PNG millimeters (see depth_to_millimeters)."""
    Path(path).write_bytes(encode_png_u16(depth_to_millimeters(depth_m)))


def write_rgb_png(path: str | Path, rgb: np.ndarray) -> None:
    Path(path).write_bytes(encode_png_rgb(rgb))
