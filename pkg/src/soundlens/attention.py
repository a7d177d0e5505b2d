"""Localization module: correlation scores, softmax attention, context
vector, and full-resolution response maps.

Scores are cosine similarities between each grid cell and the sound
context ("cos" mechanism), optionally clipped at zero ("relu" mechanism).
All functions are pure; backward companions are provided for the two
operations inside the training graph.
"""

from __future__ import annotations

import numpy as np

MECHANISMS = ("cos", "relu")


def _check_mechanism(mechanism: str) -> None:
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown attention mechanism {mechanism!r}; expected one of {MECHANISMS}")


def attention_scores(v: np.ndarray, h: np.ndarray, mechanism: str = "cos") -> np.ndarray:
    """Per-cell correlation scores between grid cells and the sound context.

    v: (M, D) grid of cell features; h: (D,) sound context.
    Zero-norm cells score 0 under both mechanisms.
    """
    scores, _ = attention_scores_forward(v, h, mechanism)
    return scores


def attention_scores_forward(v: np.ndarray, h: np.ndarray, mechanism: str = "cos"):
    _check_mechanism(mechanism)
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != h.shape[0]:
        raise ValueError(f"grid cells of dim {v.shape} do not match context dim {h.shape}")
    h_norm = float(np.linalg.norm(h))
    if h_norm == 0.0:
        raise ValueError("sound context has zero norm; cosine scores undefined")
    v_norms = np.linalg.norm(v, axis=1)
    safe = np.where(v_norms > 0.0, v_norms, 1.0)
    cos = (v @ h) / (safe * h_norm)
    cos = np.where(v_norms > 0.0, cos, 0.0)
    scores = np.maximum(cos, 0.0) if mechanism == "relu" else cos
    return scores, (v, h, v_norms, h_norm, cos, mechanism)


def attention_scores_backward(cache, g_scores: np.ndarray):
    """Gradients of the score map with respect to (v, h)."""
    v, h, v_norms, h_norm, cos, mechanism = cache
    g = np.asarray(g_scores, dtype=np.float64)
    if mechanism == "relu":
        g = np.where(cos > 0.0, g, 0.0)
    safe = np.where(v_norms > 0.0, v_norms, 1.0)
    v_hat = v / safe[:, None]
    h_hat = h / h_norm
    live = (v_norms > 0.0).astype(np.float64)
    # d cos_i / d v_i = (h_hat - cos_i * v_hat_i) / |v_i|
    gv = (g * live / safe)[:, None] * (h_hat[None, :] - cos[:, None] * v_hat)
    # d cos_i / d h = (v_hat_i - cos_i * h_hat) / |h|
    coeff = g * live / h_norm
    gh = v_hat.T @ coeff - (coeff @ cos) * h_hat
    return gv, gh


def softmax_normalize(scores: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax over the score map."""
    a = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("scores must be finite")
    e = np.exp(a - a.max())
    return e / e.sum()


def softmax_backward(alpha: np.ndarray, g_alpha: np.ndarray) -> np.ndarray:
    return alpha * (g_alpha - float(g_alpha @ alpha))


def context_vector(v: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Attention-weighted average of grid cell features: z = sum_i alpha_i v_i."""
    v = np.asarray(v, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if v.shape[0] != alpha.shape[0]:
        raise ValueError(f"{alpha.shape[0]} weights for {v.shape[0]} grid cells")
    if abs(float(alpha.sum()) - 1.0) > 1e-6:
        raise ValueError("attention weights must sum to 1")
    return alpha @ v


def context_vector_backward(v: np.ndarray, alpha: np.ndarray, g_z: np.ndarray):
    g_alpha = v @ g_z
    g_v = np.outer(alpha, g_z)
    return g_v, g_alpha


def full_resolution_response(grid_map: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinearly upsample a grid response to pixel resolution and min-max
    rescale it to [0, 1].  A constant map rescales to all zeros.
    """
    m = np.asarray(grid_map, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D grid map, got shape {m.shape}")
    gh, gw = m.shape
    if height < gh or width < gw:
        raise ValueError(f"target {height}x{width} smaller than grid {gh}x{gw}")
    up = _bilinear_upsample(m, height, width)
    lo, hi = float(up.min()), float(up.max())
    if hi - lo <= 0.0:
        return np.zeros((height, width))
    return (up - lo) / (hi - lo)


def _bilinear_upsample(m: np.ndarray, height: int, width: int) -> np.ndarray:
    gh, gw = m.shape
    ys = (np.arange(height) + 0.5) * gh / height - 0.5
    xs = (np.arange(width) + 0.5) * gw / width - 0.5
    ys = np.clip(ys, 0.0, gh - 1.0)
    xs = np.clip(xs, 0.0, gw - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = m[np.ix_(y0, x0)] * (1 - fx) + m[np.ix_(y0, x1)] * fx
    bot = m[np.ix_(y1, x0)] * (1 - fx) + m[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy
