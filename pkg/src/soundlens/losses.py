"""Training objectives: triplet distance-ratio loss, supervised attention
cross-entropy, the gated combination, and a finite-difference gradient
checker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TripletDistances:
    d_pos: float
    d_neg: float


@dataclass(frozen=True)
class LossBreakdown:
    l_unsup: float
    l_sup: float
    lam: float
    l_total: float


def triplet_distances(f_v: np.ndarray, f_s_pos: np.ndarray, f_s_neg: np.ndarray) -> TripletDistances:
    """Euclidean distances from the visual embedding to its positive and
    negative sound embeddings."""
    f_v = np.asarray(f_v, dtype=np.float64)
    f_s_pos = np.asarray(f_s_pos, dtype=np.float64)
    f_s_neg = np.asarray(f_s_neg, dtype=np.float64)
    if not (f_v.shape == f_s_pos.shape == f_s_neg.shape):
        raise ValueError(
            f"embedding shapes differ: {f_v.shape}, {f_s_pos.shape}, {f_s_neg.shape}"
        )
    return TripletDistances(
        d_pos=float(np.linalg.norm(f_v - f_s_pos)),
        d_neg=float(np.linalg.norm(f_v - f_s_neg)),
    )


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def distance_ratio_loss(d: TripletDistances) -> float:
    """Softmax-normalized distance-ratio loss: 2 * logistic(d_pos - d_neg)^2.

    Equivalent to || [D+, D-] - [0, 1] ||^2 with D+- the softmax of the two
    distances, but computed through the logistic of the difference for
    stability.
    """
    if not (np.isfinite(d.d_pos) and np.isfinite(d.d_neg)):
        raise ValueError("triplet distances must be finite")
    s = _logistic(d.d_pos - d.d_neg)
    return float(2.0 * s * s)


def distance_ratio_loss_grad(d: TripletDistances):
    """d loss / d (d_pos, d_neg)."""
    s = _logistic(d.d_pos - d.d_neg)
    g = 4.0 * s * s * (1.0 - s)
    return g, -g


def supervised_attention_loss(alpha: np.ndarray, alpha_gt: np.ndarray) -> float:
    """Cross-entropy of the attention map against a binary target map:
    -sum_i gt_i * log(alpha_i) (plain sum, not normalized by target count)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    gt = np.asarray(alpha_gt, dtype=np.float64)
    if alpha.shape != gt.shape:
        raise ValueError(f"attention map {alpha.shape} vs target map {gt.shape}")
    if not np.all((gt == 0.0) | (gt == 1.0)):
        raise ValueError("ground-truth attention map must be binary")
    if not gt.any():
        raise ValueError("supervision claimed but ground-truth attention map is all zeros")
    if np.any(alpha <= 0.0):
        raise ValueError("attention map must be strictly positive (softmax output)")
    return float(-(gt * np.log(alpha)).sum())


def supervised_attention_loss_grad(alpha: np.ndarray, alpha_gt: np.ndarray) -> np.ndarray:
    return -np.asarray(alpha_gt, dtype=np.float64) / alpha


def combined_loss(
    f_v,
    f_s_pos,
    f_s_neg,
    alpha=None,
    alpha_gt=None,
    weights=(1.0, 1.0),
) -> LossBreakdown:
    """Weighted sum of the unsupervised and supervised losses.

    The supervision gate lambda is 1 when alpha_gt is attached to the
    sample and 0 otherwise; with the gate off the supervised term is never
    evaluated.
    """
    w_u, w_s = float(weights[0]), float(weights[1])
    l_u = distance_ratio_loss(triplet_distances(f_v, f_s_pos, f_s_neg))
    if alpha_gt is None:
        return LossBreakdown(l_unsup=l_u, l_sup=0.0, lam=0.0, l_total=w_u * l_u)
    if alpha is None:
        raise ValueError("supervised sample requires the attention map")
    l_s = supervised_attention_loss(alpha, alpha_gt)
    return LossBreakdown(l_unsup=l_u, l_sup=l_s, lam=1.0, l_total=w_u * l_u + w_s * l_s)


def gradient_check(
    loss_and_grad,
    params: dict,
    probe_count: int = 10,
    eps: float = 1e-5,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare analytic gradients against central finite differences.

    ``loss_and_grad(params) -> (loss, grads)`` must be differentiable at
    ``params``; probes landing on a non-smooth point (ReLU kink, pool-tie
    switch), detected by comparing the eps and eps/2 difference quotients,
    are redrawn to honor that precondition.  Returns the worst relative
    error over ``probe_count`` random parameter coordinates.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    rng = rng or np.random.default_rng(0)
    loss0, grads = loss_and_grad(params)
    if not np.isfinite(loss0):
        raise ValueError("loss is not finite at the probe point")
    names = sorted(params)
    sizes = np.array([params[n].size for n in names])
    total = int(sizes.sum())

    def eval_at(name, idx, delta):
        saved = params[name].flat[idx]
        params[name].flat[idx] = saved + delta
        try:
            loss, _ = loss_and_grad(params)
        finally:
            params[name].flat[idx] = saved
        if not np.isfinite(loss):
            raise ValueError("loss is not finite at a probe point")
        return loss

    worst = 0.0
    probes = 0
    attempts = 0
    while probes < probe_count and attempts < probe_count * 20:
        attempts += 1
        flat = int(rng.integers(0, total))
        k = int(np.searchsorted(np.cumsum(sizes), flat, side="right"))
        name = names[k]
        idx = flat - int(np.concatenate([[0], np.cumsum(sizes)])[k])
        fd_full = (eval_at(name, idx, eps) - eval_at(name, idx, -eps)) / (2 * eps)
        fd_half = (eval_at(name, idx, eps / 2) - eval_at(name, idx, -eps / 2)) / eps
        # Non-smooth point: the two quotients disagree beyond truncation error.
        if abs(fd_full - fd_half) > 1e-3 * max(1.0, abs(fd_full)):
            continue
        analytic = float(grads[name].flat[idx])
        denom = max(abs(analytic), abs(fd_half), 1e-6)
        worst = max(worst, abs(analytic - fd_half) / denom)
        probes += 1
    if probes == 0:
        raise ValueError("no smooth probe coordinates found")
    return worst
