"""Convolution kernel backends.

Two interchangeable implementations of the hot conv forward/backward
loops: a compiled Cython extension (``_convext``, im2col fused with BLAS
dgemm at the C level) and a pure-NumPy fallback (``numpy_ops``).  The
compiled backend is selected at import when the extension built; callers
can switch explicitly with :func:`set_backend`.  See
``benchmarks/bench_kernels.py`` for a head-to-head comparison.
"""

from __future__ import annotations

from . import numpy_ops

try:
    from . import _convext
except ImportError:  # extension not built; numpy fallback only
    _convext = None

_BACKENDS = {"numpy": numpy_ops}
if _convext is not None:
    _BACKENDS["ext"] = _convext

_active = _BACKENDS.get("ext", numpy_ops)


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend() -> str:
    return "ext" if _active is _convext else "numpy"


def set_backend(name: str) -> None:
    """Select the conv kernel backend ("ext" or "numpy")."""
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}") from None


def conv1d_forward(x, w, b, stride):
    return _active.conv1d_forward(x, w, b, stride)


def conv1d_backward(x, w, stride, gout):
    return _active.conv1d_backward(x, w, stride, gout)


def conv2d_forward(x, w, b, pad):
    return _active.conv2d_forward(x, w, b, pad)


def conv2d_backward(x, w, pad, gout):
    return _active.conv2d_backward(x, w, pad, gout)
