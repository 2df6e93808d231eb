# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrence kernel. Contract documented in _gru_numpy.py.

Per-step matrix products go through BLAS dgemm; gate math runs in plain C
loops. The whole recurrence executes without the GIL.
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

BACKEND_NAME = "cython"


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        e = exp(-x)
        return 1.0 / (1.0 + e)
    e = exp(x)
    return e / (1.0 + e)


cdef void _rm_gemm(bint ta, bint tb, int m, int n, int k, double alpha,
                   const double* a, int lda, const double* b, int ldb,
                   double beta, double* c, int ldc) noexcept nogil:
    # Row-major C(m,n) = alpha * op(A) @ op(B) + beta * C via the
    # column-major identity C^T = op(B)^T op(A)^T. Leading dimensions are
    # the row-major row strides.
    cdef char cta = c'T' if ta else c'N'
    cdef char ctb = c'T' if tb else c'N'
    if m == 0 or n == 0:
        return
    dgemm(&ctb, &cta, &n, &m, &k, &alpha, <double*> b, &ldb,
          <double*> a, &lda, &beta, c, &ldc)


def gru_seq_forward(double[:, :, ::1] xp, double[:, ::1] u, double[:, ::1] h0):
    cdef int t_steps = xp.shape[0]
    cdef int batch = xp.shape[1]
    cdef int h3 = xp.shape[2]
    cdef int hidden = h3 // 3

    h_arr = np.empty((t_steps, batch, hidden))
    z_arr = np.empty((t_steps, batch, hidden))
    r_arr = np.empty((t_steps, batch, hidden))
    uph_arr = np.empty((t_steps, batch, hidden))
    hc_arr = np.empty((t_steps, batch, hidden))
    up_arr = np.empty((batch, h3))

    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] z = z_arr
    cdef double[:, :, ::1] r = r_arr
    cdef double[:, :, ::1] uph = uph_arr
    cdef double[:, :, ::1] hc = hc_arr
    cdef double[:, ::1] up = up_arr

    cdef const double* hp
    cdef int t, i, j
    cdef double zt, rt, hct, hpv, upij

    if t_steps == 0 or batch == 0 or hidden == 0:
        return h_arr, z_arr, r_arr, uph_arr, hc_arr

    with nogil:
        for t in range(t_steps):
            hp = &h0[0, 0] if t == 0 else &h[t - 1, 0, 0]
            _rm_gemm(0, 0, batch, h3, hidden, 1.0, hp, hidden,
                     &u[0, 0], h3, 0.0, &up[0, 0], h3)
            for i in range(batch):
                for j in range(hidden):
                    hpv = hp[i * hidden + j]
                    zt = _sigmoid(xp[t, i, j] + up[i, j])
                    rt = _sigmoid(xp[t, i, hidden + j] + up[i, hidden + j])
                    upij = up[i, 2 * hidden + j]
                    hct = tanh(xp[t, i, 2 * hidden + j] + upij * rt)
                    z[t, i, j] = zt
                    r[t, i, j] = rt
                    uph[t, i, j] = upij
                    hc[t, i, j] = hct
                    h[t, i, j] = zt * hpv + (1.0 - zt) * hct
    return h_arr, z_arr, r_arr, uph_arr, hc_arr


def gru_seq_backward(double[:, :, ::1] dh_out, double[:, ::1] u,
                     double[:, ::1] h0, double[:, :, ::1] h,
                     double[:, :, ::1] z, double[:, :, ::1] r,
                     double[:, :, ::1] uph, double[:, :, ::1] hc):
    cdef int t_steps = h.shape[0]
    cdef int batch = h.shape[1]
    cdef int hidden = h.shape[2]
    cdef int h3 = 3 * hidden

    dxp_arr = np.empty((t_steps, batch, h3))
    du_arr = np.zeros((hidden, h3))
    dh_arr = np.zeros((batch, hidden))
    dup_arr = np.empty((batch, h3))
    tmp_arr = np.empty((batch, hidden))

    cdef double[:, :, ::1] dxp = dxp_arr
    cdef double[:, ::1] du = du_arr
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] dup = dup_arr
    cdef double[:, ::1] tmp = tmp_arr

    cdef const double* hp
    cdef int t, i, j
    cdef double dhv, zt, rt, hct, upij, dz, dpre_h, dr

    if t_steps == 0 or batch == 0 or hidden == 0:
        return dxp_arr, du_arr, dh_arr

    with nogil:
        for t in range(t_steps - 1, -1, -1):
            hp = &h0[0, 0] if t == 0 else &h[t - 1, 0, 0]
            for i in range(batch):
                for j in range(hidden):
                    dhv = dh[i, j] + dh_out[t, i, j]
                    zt = z[t, i, j]
                    rt = r[t, i, j]
                    hct = hc[t, i, j]
                    upij = uph[t, i, j]
                    dz = dhv * (hp[i * hidden + j] - hct)
                    dpre_h = dhv * (1.0 - zt) * (1.0 - hct * hct)
                    dr = dpre_h * upij
                    dup[i, j] = dz * zt * (1.0 - zt)
                    dup[i, hidden + j] = dr * rt * (1.0 - rt)
                    dup[i, 2 * hidden + j] = dpre_h * rt
                    dxp[t, i, j] = dup[i, j]
                    dxp[t, i, hidden + j] = dup[i, hidden + j]
                    dxp[t, i, 2 * hidden + j] = dpre_h
                    dh[i, j] = dhv * zt
            _rm_gemm(1, 0, hidden, h3, batch, 1.0, hp, hidden,
                     &dup[0, 0], h3, 1.0, &du[0, 0], h3)
            _rm_gemm(0, 1, batch, hidden, h3, 1.0, &dup[0, 0], h3,
                     &u[0, 0], h3, 0.0, &tmp[0, 0], hidden)
            for i in range(batch):
                for j in range(hidden):
                    dh[i, j] = dh[i, j] + tmp[i, j]
    return dxp_arr, du_arr, dh_arr
