"""Pure-NumPy convolution kernels (fallback backend).

Same contracts as the compiled backend in ``_convext``: float64,
channels-first, valid 1-D convolution with stride, zero-padded stride-1
2-D convolution.  Heavy lifting is delegated to BLAS through
``np.tensordot``; 2-D passes are tiled over output rows so the implicit
im2col buffer stays small on large frames.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Keep the per-tile im2col buffer around 8 MB of float64.
_TILE_BUDGET = 1 << 20


def conv1d_forward(x, w, b, stride):
    """Valid 1-D correlation. x: (Ci, L), w: (Co, Ci, K), b: (Co,) -> (Co, Lo)."""
    ci, length = x.shape
    co, ci_w, k = w.shape
    if ci != ci_w:
        raise ValueError(f"channel mismatch: input {ci}, weight {ci_w}")
    if length < k:
        raise ValueError(f"input length {length} shorter than kernel {k}")
    windows = sliding_window_view(x, k, axis=1)[:, ::stride]  # (Ci, Lo, K)
    out = np.tensordot(w, windows, axes=([1, 2], [0, 2]))
    out += b[:, None]
    return np.ascontiguousarray(out)


def conv1d_backward(x, w, stride, gout):
    """Gradients of conv1d_forward. Returns (gx, gw, gb)."""
    ci, length = x.shape
    co, _, k = w.shape
    lo = gout.shape[1]
    windows = sliding_window_view(x, k, axis=1)[:, ::stride]
    gw = np.tensordot(gout, windows, axes=([1], [1]))  # (Co, Ci, K)
    gb = gout.sum(axis=1)
    gx = np.zeros_like(x)
    span = np.tensordot(w, gout, axes=([0], [0]))  # (Ci, K, Lo)
    for j in range(k):
        gx[:, j : j + stride * lo : stride] += span[:, j, :]
    return gx, np.ascontiguousarray(gw), gb


def conv2d_forward(x, w, b, pad):
    """Stride-1 zero-padded 2-D correlation.

    x: (Ci, H, W), w: (Co, Ci, Kh, Kw), b: (Co,) -> (Co, Ho, Wo)
    with Ho = H + 2*pad - Kh + 1.
    """
    ci, h, wd = x.shape
    co, ci_w, kh, kw = w.shape
    if ci != ci_w:
        raise ValueError(f"channel mismatch: input {ci}, weight {ci_w}")
    if kh != kw:
        raise ValueError("only square 2-D kernels are supported")
    ho = h + 2 * pad - kh + 1
    wo = wd + 2 * pad - kw + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"input {h}x{wd} too small for kernel {kh}x{kw} at pad {pad}")
    xp = x
    if pad:
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (Ci, Ho, Wo, Kh, Kw)
    out = np.empty((co, ho, wo))
    tile = max(1, _TILE_BUDGET // max(1, ci * kh * kw * wo))
    for y0 in range(0, ho, tile):
        y1 = min(y0 + tile, ho)
        out[:, y0:y1] = np.tensordot(
            w, windows[:, y0:y1], axes=([1, 2, 3], [0, 3, 4])
        )
    out += b[:, None, None]
    return out


def conv2d_backward(x, w, pad, gout):
    """Gradients of conv2d_forward. Returns (gx, gw, gb)."""
    ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho, wo = gout.shape[1:]
    xp = x
    if pad:
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    gw = np.zeros_like(w)
    tile = max(1, _TILE_BUDGET // max(1, ci * kh * kw * wo))
    for y0 in range(0, ho, tile):
        y1 = min(y0 + tile, ho)
        gw += np.tensordot(gout[:, y0:y1], windows[:, y0:y1], axes=([1, 2], [1, 2]))
    gb = gout.sum(axis=(1, 2))
    # Full correlation of gout with the flipped, channel-swapped kernel.
    w_rot = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    gx = conv2d_forward(gout, w_rot, np.zeros(ci), kh - 1 - pad)
    return gx, gw, gb
