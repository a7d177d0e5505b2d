"""Raster I/O: frames in, heatmaps and raw response sidecars out.

The response sidecar format is two little-endian u32 (height, width)
followed by row-major little-endian f32 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError


def load_frame(path) -> np.ndarray:
    """Load a PNG/PPM raster as a float64 (3, H, W) array in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"frame not found: {path}")
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise InputError(f"cannot decode raster {path}: {exc}") from exc
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def save_frame(path, frame: np.ndarray) -> None:
    """Write a (3, H, W) float array in [0, 1] as PNG."""
    arr = np.clip(np.round(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(str(path), format="PNG")


def save_heatmap(path, response: np.ndarray) -> None:
    """Write an H x W response in [0, 1] as an 8-bit grayscale PNG."""
    arr = np.clip(np.round(np.asarray(response) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(str(path), format="PNG")


def load_heatmap(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def save_response(path, response: np.ndarray) -> None:
    """Write the raw float sidecar for a response map."""
    arr = np.asarray(response, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected an H x W map, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f4").tobytes())


def load_response(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"response sidecar not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 8:
        raise InputError(f"truncated response sidecar {path}")
    h, w = struct.unpack("<II", raw[:8])
    expected = 8 + 4 * h * w
    if len(raw) != expected:
        raise InputError(f"response sidecar {path} has {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw[8:], dtype="<f4").reshape(h, w).astype(np.float64)
