# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled conv/pool data-movement kernels (NHWC layout).

Must stay bit-identical to the numpy fallback: col2im accumulates in
(ki, kj)-major order per target element, max pooling takes the first
maximum in row-major window order. float32 and float64 both supported.
All loops run on hoisted flat offsets; the innermost run is always the
contiguous channel dimension.
"""

import numpy as np

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] xp, int k):
    cdef Py_ssize_t B = xp.shape[0], Hp = xp.shape[1], Wp = xp.shape[2], C = xp.shape[3]
    cdef Py_ssize_t H = Hp - k + 1, W = Wp - k + 1
    cdef Py_ssize_t KKC = k * k * C
    if real is float:
        out_arr = np.empty((B * H * W, KKC), dtype=np.float32)
    else:
        out_arr = np.empty((B * H * W, KKC), dtype=np.float64)
    cdef real[:, ::1] cols = out_arr
    cdef real* X = &xp[0, 0, 0, 0]
    cdef real* O = &cols[0, 0]
    cdef Py_ssize_t b, i, j, ki, kj, c
    cdef Py_ssize_t src_row, dst_row, dst_base, src
    for b in range(B):
        for i in range(H):
            dst_row = (b * H + i) * W * KKC
            for ki in range(k):
                src_row = ((b * Hp + i + ki) * Wp) * C
                for kj in range(k):
                    dst_base = dst_row + (ki * k + kj) * C
                    src = src_row + kj * C
                    for j in range(W):
                        for c in range(C):
                            O[dst_base + j * KKC + c] = X[src + j * C + c]
    return out_arr


def col2im_add(real[:, ::1] cols, int k, Py_ssize_t B, Py_ssize_t Hp,
               Py_ssize_t Wp, Py_ssize_t C):
    cdef Py_ssize_t H = Hp - k + 1, W = Wp - k + 1
    cdef Py_ssize_t KKC = k * k * C
    if real is float:
        out_arr = np.zeros((B, Hp, Wp, C), dtype=np.float32)
    else:
        out_arr = np.zeros((B, Hp, Wp, C), dtype=np.float64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef real* Y = &out[0, 0, 0, 0]
    cdef real* S = &cols[0, 0]
    cdef Py_ssize_t b, i, j, ki, kj, c
    cdef Py_ssize_t src_row, dst, src
    for ki in range(k):
        for kj in range(k):
            for b in range(B):
                for i in range(H):
                    src_row = (b * H + i) * W * KKC + (ki * k + kj) * C
                    dst = ((b * Hp + i + ki) * Wp + kj) * C
                    for j in range(W):
                        src = src_row + j * KKC
                        for c in range(C):
                            Y[dst + j * C + c] += S[src + c]
    return out_arr


def maxpool_forward(real[:, :, :, ::1] x, int k):
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t Ho = H // k, Wo = W // k
    if real is float:
        out_arr = np.empty((B, Ho, Wo, C), dtype=np.float32)
    else:
        out_arr = np.empty((B, Ho, Wo, C), dtype=np.float64)
    idx_arr = np.empty((B, Ho, Wo, C), dtype=np.int64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef long long[:, :, :, ::1] idx = idx_arr
    cdef real* X = &x[0, 0, 0, 0]
    cdef Py_ssize_t b, c, i, j, di, dj
    cdef Py_ssize_t win, probe
    cdef real best, v
    cdef long long bestpos
    for b in range(B):
        for i in range(Ho):
            for j in range(Wo):
                win = ((b * H + i * k) * W + j * k) * C
                for c in range(C):
                    best = X[win + c]
                    bestpos = 0
                    for di in range(k):
                        probe = win + di * W * C + c
                        for dj in range(k):
                            v = X[probe + dj * C]
                            if v > best:
                                best = v
                                bestpos = di * k + dj
                    out[b, i, j, c] = best
                    idx[b, i, j, c] = bestpos
    return out_arr, idx_arr


def maxpool_backward(real[:, :, :, ::1] grad_out, long long[:, :, :, ::1] idx,
                     int k, Py_ssize_t H, Py_ssize_t W):
    cdef Py_ssize_t B = grad_out.shape[0], Ho = grad_out.shape[1]
    cdef Py_ssize_t Wo = grad_out.shape[2], C = grad_out.shape[3]
    if real is float:
        grad_arr = np.zeros((B, H, W, C), dtype=np.float32)
    else:
        grad_arr = np.zeros((B, H, W, C), dtype=np.float64)
    cdef real[:, :, :, ::1] grad = grad_arr
    cdef real* Y = &grad[0, 0, 0, 0]
    cdef Py_ssize_t b, c, i, j, win
    cdef long long p
    for b in range(B):
        for i in range(Ho):
            for j in range(Wo):
                win = ((b * H + i * k) * W + j * k) * C
                for c in range(C):
                    p = idx[b, i, j, c]
                    Y[win + (p // k) * W * C + (p % k) * C + c] = grad_out[b, i, j, c]
    return grad_arr
