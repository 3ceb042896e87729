# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: LSTM unroll (forward and backward) and rasterization.

Signatures and semantics mirror ``_pykernels``. All arrays are C-contiguous;
the Python wrappers in ``kernels`` take care of that.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport copysign, copysignf, exp, expf, expm1, expm1f, fabs, fabsf
from scipy.linalg.cython_blas cimport sgemm, dgemm

cnp.import_array()

ctypedef fused real:
    float
    double


cdef inline real _exp(real x) noexcept nogil:
    if real is float:
        return expf(x)
    else:
        return exp(x)


cdef inline real _tanh(real x) noexcept nogil:
    # glibc tanh is several times slower than exp; expm1 keeps relative
    # accuracy near zero, the exp form is exact enough elsewhere
    cdef real a, t
    if real is float:
        a = fabsf(x)
        if a < 0.55:
            t = expm1f(-2.0 * a)
            return copysignf(-t / (t + 2.0), x)
        return copysignf(1.0 - 2.0 / (expf(2.0 * a) + 1.0), x)
    else:
        a = fabs(x)
        if a < 0.55:
            t = expm1(-2.0 * a)
            return copysign(-t / (t + 2.0), x)
        return copysign(1.0 - 2.0 / (exp(2.0 * a) + 1.0), x)


cdef inline real _sig(real x) noexcept nogil:
    cdef real e
    if x >= 0:
        return 1.0 / (1.0 + _exp(-x))
    e = _exp(x)
    return e / (1.0 + e)


cdef inline void _gemm_rm(const real* a, const real* b, real* c, int m, int n, int k,
                          real beta, bint trans_b) noexcept nogil:
    # row-major C(m, n) = A(m, k) @ op(B) + beta * C, op(B) = B or B^T
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef real one = 1.0
    cdef int ldb
    cdef char* tb
    if trans_b:
        # B stored as (n, k)
        ldb = k
        tb = &tt
    else:
        ldb = n
        tb = &tn
    if real is float:
        sgemm(tb, &tn, &n, &m, &k, &one, <float*>b, &ldb, <float*>a, &k, &beta, c, &n)
    else:
        dgemm(tb, &tn, &n, &m, &k, &one, <double*>b, &ldb, <double*>a, &k, &beta, c, &n)


def lstm_seq_forward(const real[:, :, ::1] xz, const real[:, ::1] wh, const real[:, ::1] h0, const real[:, ::1] c0):
    cdef Py_ssize_t T = xz.shape[0], B = xz.shape[1], H4 = xz.shape[2]
    cdef Py_ssize_t H = H4 // 4
    dtype = np.float32 if real is float else np.float64
    hs_a = np.empty((T, B, H), dtype=dtype)
    cs_a = np.empty((T, B, H), dtype=dtype)
    tcs_a = np.empty((T, B, H), dtype=dtype)
    acts_a = np.array(xz, dtype=dtype, copy=True)
    cdef real[:, :, ::1] hs = hs_a
    cdef real[:, :, ::1] cs = cs_a
    cdef real[:, :, ::1] tcs = tcs_a
    cdef real[:, :, ::1] acts = acts_a
    cdef Py_ssize_t t, b, j
    cdef real ig, fg, gg, og, cp, cn, tc
    cdef const real* hprev
    cdef const real* cprev
    with nogil:
        for t in range(T):
            if t == 0:
                hprev = &h0[0, 0]
                cprev = &c0[0, 0]
            else:
                hprev = &hs[t - 1, 0, 0]
                cprev = &cs[t - 1, 0, 0]
            if H > 0 and B > 0:
                _gemm_rm(hprev, &wh[0, 0], &acts[t, 0, 0], <int>B, <int>H4, <int>H, 1.0, False)
            for b in range(B):
                for j in range(H):
                    ig = _sig(acts[t, b, j])
                    fg = _sig(acts[t, b, H + j])
                    gg = _tanh(acts[t, b, 2 * H + j])
                    og = _sig(acts[t, b, 3 * H + j])
                    acts[t, b, j] = ig
                    acts[t, b, H + j] = fg
                    acts[t, b, 2 * H + j] = gg
                    acts[t, b, 3 * H + j] = og
                    cp = cprev[b * H + j]
                    cn = fg * cp + ig * gg
                    tc = _tanh(cn)
                    cs[t, b, j] = cn
                    tcs[t, b, j] = tc
                    hs[t, b, j] = og * tc
    return hs_a, cs_a, acts_a, tcs_a


def lstm_seq_backward(const real[:, :, ::1] dhs, const real[:, ::1] dc_last, const real[:, ::1] wh,
                      const real[:, :, ::1] acts, const real[:, :, ::1] cs, const real[:, :, ::1] tcs,
                      const real[:, ::1] c0):
    cdef Py_ssize_t T = dhs.shape[0], B = dhs.shape[1], H = dhs.shape[2]
    cdef Py_ssize_t H4 = 4 * H
    dtype = np.float32 if real is float else np.float64
    dz_a = np.empty((T, B, H4), dtype=dtype)
    dh_a = np.zeros((B, H), dtype=dtype)
    dc_a = np.array(dc_last, dtype=dtype, copy=True)
    cdef real[:, :, ::1] dz = dz_a
    cdef real[:, ::1] dh_next = dh_a
    cdef real[:, ::1] dc_next = dc_a
    cdef Py_ssize_t t, b, j
    cdef real ig, fg, gg, og, tc, cp, dh, dc
    with nogil:
        for t in range(T - 1, -1, -1):
            for b in range(B):
                for j in range(H):
                    ig = acts[t, b, j]
                    fg = acts[t, b, H + j]
                    gg = acts[t, b, 2 * H + j]
                    og = acts[t, b, 3 * H + j]
                    tc = tcs[t, b, j]
                    if t > 0:
                        cp = cs[t - 1, b, j]
                    else:
                        cp = c0[b, j]
                    dh = dhs[t, b, j] + dh_next[b, j]
                    dc = dc_next[b, j] + dh * og * (1.0 - tc * tc)
                    dz[t, b, j] = dc * gg * ig * (1.0 - ig)
                    dz[t, b, H + j] = dc * cp * fg * (1.0 - fg)
                    dz[t, b, 2 * H + j] = dc * ig * (1.0 - gg * gg)
                    dz[t, b, 3 * H + j] = dh * tc * og * (1.0 - og)
                    dc_next[b, j] = dc * fg
            if H > 0 and B > 0:
                # dh_next = dz[t] @ wh.T ; wh is (H, 4H) i.e. op(B)=B^T with B stored (n=H, k=4H)
                _gemm_rm(&dz[t, 0, 0], &wh[0, 0], &dh_next[0, 0], <int>B, <int>H, <int>H4, 0.0, True)
    return dz_a, dh_a, dc_a


def rasterize(const double[:, :, ::1] frames, int height, int width, double radius):
    cdef Py_ssize_t N = frames.shape[0], K = frames.shape[1]
    out_a = np.zeros((N, height, width), dtype=np.float64)
    cdef double[:, :, ::1] out = out_a
    cdef Py_ssize_t n, k
    cdef int i, j, i0, i1, j0, j1
    cdef double x, y, cx, cy, r2 = radius * radius, dx, dy
    with nogil:
        for n in range(N):
            for k in range(K):
                x = frames[n, k, 0]
                y = frames[n, k, 1]
                if x < -1.5:
                    x = -1.5
                elif x > 1.5:
                    x = 1.5
                if y < -1.5:
                    y = -1.5
                elif y > 1.5:
                    y = 1.5
                cx = (x + 1.0) * 0.5 * width
                cy = (y + 1.0) * 0.5 * height
                i0 = <int>(cy - radius) - 1
                i1 = <int>(cy + radius) + 1
                j0 = <int>(cx - radius) - 1
                j1 = <int>(cx + radius) + 1
                if i0 < 0:
                    i0 = 0
                if j0 < 0:
                    j0 = 0
                if i1 > height - 1:
                    i1 = height - 1
                if j1 > width - 1:
                    j1 = width - 1
                for i in range(i0, i1 + 1):
                    dy = i - cy
                    for j in range(j0, j1 + 1):
                        dx = j - cx
                        if dy * dy + dx * dx <= r2:
                            out[n, i, j] = 1.0
    return out_a
