# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels: C-level im2col fused with BLAS dgemm.

Float64, channels-first layouts identical to ``numpy_ops``.  2-D passes
tile over output rows so the column buffer stays cache-friendly on large
frames.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

DEF TILE_BUDGET = 1048576  # float64 elements per im2col tile (~8 MB)


cdef inline void _gemm_rm(bint ta, bint tb, int m, int n, int k,
                          double alpha, double* a, int lda,
                          double* b, int ldb, double beta,
                          double* c, int ldc) noexcept nogil:
    """Row-major C(m,n) = alpha*op(A)op(B) + beta*C via column-major dgemm."""
    cdef char fta = b'T' if tb else b'N'
    cdef char ftb = b'T' if ta else b'N'
    dgemm(&fta, &ftb, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef void _im2col1d(double[:, ::1] x, double[:, ::1] cols,
                    int k, int stride, int lo) noexcept nogil:
    cdef int ci = x.shape[0]
    cdef int c, j, t
    for c in range(ci):
        for j in range(k):
            for t in range(lo):
                cols[c * k + j, t] = x[c, t * stride + j]


def conv1d_forward(cnp.ndarray[double, ndim=2] x,
                   cnp.ndarray[double, ndim=3] w,
                   cnp.ndarray[double, ndim=1] b,
                   int stride):
    cdef int ci = x.shape[0], length = x.shape[1]
    cdef int co = w.shape[0], k = w.shape[2]
    if w.shape[1] != ci:
        raise ValueError(f"channel mismatch: input {ci}, weight {w.shape[1]}")
    if length < k:
        raise ValueError(f"input length {length} shorter than kernel {k}")
    cdef int lo = (length - k) // stride + 1
    cols_arr = np.empty((ci * k, lo))
    out_arr = np.empty((co, lo))
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, ::1] outv = out_arr
    cdef double[::1] bv = np.ascontiguousarray(b)
    cdef int kk = ci * k, c, t
    with nogil:
        _im2col1d(xv, cols, k, stride, lo)
        _gemm_rm(0, 0, co, lo, kk, 1.0, &wv[0, 0, 0], kk,
                 &cols[0, 0], lo, 0.0, &outv[0, 0], lo)
        for c in range(co):
            for t in range(lo):
                outv[c, t] += bv[c]
    return out_arr


def conv1d_backward(cnp.ndarray[double, ndim=2] x,
                    cnp.ndarray[double, ndim=3] w,
                    int stride,
                    cnp.ndarray[double, ndim=2] gout):
    cdef int ci = x.shape[0], length = x.shape[1]
    cdef int co = w.shape[0], k = w.shape[2]
    cdef int lo = gout.shape[1]
    cols_arr = np.empty((ci * k, lo))
    gcols_arr = np.empty((ci * k, lo))
    gw_arr = np.empty((co, ci, k))
    gb_arr = np.empty(co)
    gx_arr = np.zeros((ci, length))
    cdef double[:, ::1] cols = cols_arr, gcols = gcols_arr
    cdef double[:, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, ::1] gov = np.ascontiguousarray(gout)
    cdef double[:, :, ::1] gwv = gw_arr
    cdef double[::1] gbv = gb_arr
    cdef double[:, ::1] gxv = gx_arr
    cdef int kk = ci * k, c, j, t
    cdef double acc
    with nogil:
        _im2col1d(xv, cols, k, stride, lo)
        # gw (Co, Ci*K) = gout (Co, Lo) . cols^T (Lo, Ci*K)
        _gemm_rm(0, 1, co, kk, lo, 1.0, &gov[0, 0], lo,
                 &cols[0, 0], lo, 0.0, &gwv[0, 0, 0], kk)
        # gcols (Ci*K, Lo) = w^T (Ci*K, Co) . gout (Co, Lo)
        _gemm_rm(1, 0, kk, lo, co, 1.0, &wv[0, 0, 0], kk,
                 &gov[0, 0], lo, 0.0, &gcols[0, 0], lo)
        for c in range(ci):
            for j in range(k):
                for t in range(lo):
                    gxv[c, t * stride + j] += gcols[c * k + j, t]
        for c in range(co):
            acc = 0.0
            for t in range(lo):
                acc += gov[c, t]
            gbv[c] = acc
    return gx_arr, gw_arr, gb_arr


cdef void _im2col2d_tile(double[:, :, ::1] x, double[:, ::1] cols,
                         int kh, int kw, int pad,
                         int y0, int rows, int wo) noexcept nogil:
    """Fill cols (Ci*Kh*Kw, rows*Wo) for output rows [y0, y0+rows)."""
    cdef int ci = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef int c, r, dy, dx, ox, iy, ix, row_idx
    cdef double v
    for c in range(ci):
        for dy in range(kh):
            for dx in range(kw):
                row_idx = (c * kh + dy) * kw + dx
                for r in range(rows):
                    iy = y0 + r + dy - pad
                    if iy < 0 or iy >= h:
                        for ox in range(wo):
                            cols[row_idx, r * wo + ox] = 0.0
                        continue
                    for ox in range(wo):
                        ix = ox + dx - pad
                        if 0 <= ix < wd:
                            v = x[c, iy, ix]
                        else:
                            v = 0.0
                        cols[row_idx, r * wo + ox] = v


def conv2d_forward(cnp.ndarray[double, ndim=3] x,
                   cnp.ndarray[double, ndim=4] w,
                   cnp.ndarray[double, ndim=1] b,
                   int pad):
    cdef int ci = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef int co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    if w.shape[1] != ci:
        raise ValueError(f"channel mismatch: input {ci}, weight {w.shape[1]}")
    if kh != kw:
        raise ValueError("only square 2-D kernels are supported")
    cdef int ho = h + 2 * pad - kh + 1
    cdef int wo = wd + 2 * pad - kw + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"input {h}x{wd} too small for kernel {kh}x{kw} at pad {pad}")
    cdef int kk = ci * kh * kw
    cdef int tile = max(1, TILE_BUDGET // max(1, kk * wo))
    cols_arr = np.empty((kk, min(tile, ho) * wo))
    out_arr = np.empty((co, ho, wo))
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, ::1] outv = out_arr
    cdef double[::1] bv = np.ascontiguousarray(b)
    cdef int y0, rows, c, i, n
    with nogil:
        y0 = 0
        while y0 < ho:
            rows = min(tile, ho - y0)
            n = rows * wo
            _im2col2d_tile(xv, cols, kh, kw, pad, y0, rows, wo)
            # C rows (one per channel) are strided by the full map size
            _gemm_rm(0, 0, co, n, kk, 1.0, &wv[0, 0, 0, 0], kk,
                     &cols[0, 0], cols.shape[1], 0.0, &outv[0, y0, 0], ho * wo)
            y0 += rows
        for c in range(co):
            for i in range(ho * wo):
                outv[c, i // wo, i % wo] += bv[c]
    return out_arr


def conv2d_backward(cnp.ndarray[double, ndim=3] x,
                    cnp.ndarray[double, ndim=4] w,
                    int pad,
                    cnp.ndarray[double, ndim=3] gout):
    cdef int ci = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef int co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef int ho = gout.shape[1], wo = gout.shape[2]
    cdef int kk = ci * kh * kw
    cdef int hp = h + 2 * pad, wp = wd + 2 * pad
    cdef int tile = max(1, TILE_BUDGET // max(1, kk * wo))
    cols_arr = np.empty((kk, min(tile, ho) * wo))
    gcols_arr = np.empty((kk, min(tile, ho) * wo))
    gw_arr = np.zeros((co, ci, kh, kw))
    gb_arr = np.zeros(co)
    gxp_arr = np.zeros((ci, hp, wp))
    cdef double[:, ::1] cols = cols_arr, gcols = gcols_arr
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, ::1] gov = np.ascontiguousarray(gout)
    cdef double[:, :, :, ::1] gwv = gw_arr
    cdef double[::1] gbv = gb_arr
    cdef double[:, :, ::1] gxpv = gxp_arr
    cdef int y0, rows, n, c, r, dy, dx, ox, iy, ix, row_idx, i
    with nogil:
        y0 = 0
        while y0 < ho:
            rows = min(tile, ho - y0)
            n = rows * wo
            _im2col2d_tile(xv, cols, kh, kw, pad, y0, rows, wo)
            # gw += gout_tile (Co, n) . cols^T (n, kk); gout rows stride ho*wo
            _gemm_rm(0, 1, co, kk, n, 1.0, &gov[0, y0, 0], ho * wo,
                     &cols[0, 0], cols.shape[1], 1.0, &gwv[0, 0, 0, 0], kk)
            # gcols (kk, n) = w^T (kk, Co) . gout_tile (Co, n)
            _gemm_rm(1, 0, kk, n, co, 1.0, &wv[0, 0, 0, 0], kk,
                     &gov[0, y0, 0], ho * wo, 0.0, &gcols[0, 0], cols.shape[1])
            # col2im scatter-add into the padded input gradient
            for c in range(ci):
                for dy in range(kh):
                    for dx in range(kw):
                        row_idx = (c * kh + dy) * kw + dx
                        for r in range(rows):
                            iy = y0 + r + dy
                            for ox in range(wo):
                                gxpv[c, iy, ox + dx] += gcols[row_idx, r * wo + ox]
            y0 += rows
        for c in range(co):
            for i in range(ho * wo):
                gbv[c] += gov[c, i // wo, i % wo]
    if pad:
        gx_arr = np.ascontiguousarray(gxp_arr[:, pad:hp - pad, pad:wp - pad])
    else:
        gx_arr = gxp_arr
    return gx_arr, gw_arr, gb_arr
