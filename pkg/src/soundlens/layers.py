"""Differentiable building blocks shared by the sound and visual encoders.

Every operation comes as a forward/backward pair over plain float64
arrays.  Forward functions return (output, cache); backward functions
take the cache plus the upstream gradient and return gradients in the
same order as the forward inputs.  Convolutions dispatch through
:mod:`soundlens.kernels`.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Fan-in-scaled uniform init: U(-a, a) with a = sqrt(1/fan_in)."""
    a = float(np.sqrt(1.0 / max(1, fan_in)))
    return rng.uniform(-a, a, size=shape)


def relu_forward(x):
    out = np.maximum(x, 0.0)
    return out, (x,)


def relu_backward(cache, gout):
    (x,) = cache
    return np.where(x > 0.0, gout, 0.0)


def fc_forward(x, w, b):
    """Affine map: w (m, n) @ x (n,) + b (m,)."""
    return w @ x + b, (x, w)


def fc_backward(cache, gout):
    x, w = cache
    gx = w.T @ gout
    gw = np.outer(gout, x)
    return gx, gw, gout.copy()


def conv1d_forward(x, w, b, stride):
    out = kernels.conv1d_forward(x, w, b, stride)
    return out, (x, w, stride)


def conv1d_backward(cache, gout):
    x, w, stride = cache
    return kernels.conv1d_backward(x, w, stride, gout)


def conv2d_forward(x, w, b, pad):
    out = kernels.conv2d_forward(x, w, b, pad)
    return out, (x, w, pad)


def conv2d_backward(cache, gout):
    x, w, pad = cache
    return kernels.conv2d_backward(x, w, pad, gout)


def maxpool1d_forward(x, size):
    """Non-overlapping max pool over time; trailing remainder is dropped."""
    c, length = x.shape
    lo = length // size
    if lo < 1:
        raise ValueError(f"time axis {length} shorter than pool size {size}")
    xv = x[:, : lo * size].reshape(c, lo, size)
    idx = xv.argmax(axis=2)
    out = np.take_along_axis(xv, idx[:, :, None], axis=2)[:, :, 0]
    return out, (x.shape, size, idx)


def maxpool1d_backward(cache, gout):
    shape, size, idx = cache
    c, length = shape
    lo = idx.shape[1]
    gx = np.zeros(shape)
    gv = gx[:, : lo * size].reshape(c, lo, size)
    np.put_along_axis(gv, idx[:, :, None], gout[:, :, None], axis=2)
    return gx


def maxpool2d_forward(x, size):
    """Non-overlapping 2-D max pool; trailing remainders are dropped."""
    c, h, w = x.shape
    ho, wo = h // size, w // size
    if ho < 1 or wo < 1:
        raise ValueError(f"spatial dims {h}x{w} smaller than pool size {size}")
    xv = x[:, : ho * size, : wo * size].reshape(c, ho, size, wo, size)
    xv = xv.transpose(0, 1, 3, 2, 4).reshape(c, ho, wo, size * size)
    idx = xv.argmax(axis=3)
    out = np.take_along_axis(xv, idx[:, :, :, None], axis=3)[:, :, :, 0]
    return out, (x.shape, size, idx)


def maxpool2d_backward(cache, gout):
    shape, size, idx = cache
    c, h, w = shape
    ho, wo = idx.shape[1:]
    gv = np.zeros((c, ho, wo, size * size))
    np.put_along_axis(gv, idx[:, :, :, None], gout[:, :, :, None], axis=3)
    gx = np.zeros(shape)
    gx[:, : ho * size, : wo * size] = (
        gv.reshape(c, ho, wo, size, size).transpose(0, 1, 3, 2, 4).reshape(c, ho * size, wo * size)
    )
    return gx


def global_average_pool(activation: np.ndarray) -> np.ndarray:
    """Mean over the temporal axis of a (channels, time) grid."""
    activation = np.asarray(activation, dtype=float)
    if activation.ndim != 2 or activation.shape[1] < 1:
        raise ValueError("expected a (channels, time) grid with time >= 1")
    return activation.mean(axis=1)


def gap_forward(x):
    return global_average_pool(x), (x.shape,)


def gap_backward(cache, gout):
    (shape,) = cache
    return np.broadcast_to(gout[:, None] / shape[1], shape).copy()
