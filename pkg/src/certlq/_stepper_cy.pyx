# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled step kernel.

Twin of ``certlq._stepper.step_chunk``: identical operations in identical
order (compiled with fp-contract off), so the two backends produce the
same trace bit for bit.  Keep the loop bodies in sync.
"""

from libc.math cimport log, sqrt

import numpy as np

STATUS_CHUNK_DONE = 0
STATUS_TRIGGER = 1
STATUS_BLOWUP = 2


def step_chunk(double[::1] x, double[:, ::1] V, double[:, ::1] S,
               double[:, ::1] chol, double logdet, double logdet_start,
               const double[:, ::1] A, const double[:, ::1] B1, const double[:, ::1] B2,
               const double[:, ::1] K, const double[:, ::1] L,
               const double[:, ::1] Q, const double[:, ::1] Ru, const double[:, ::1] Rv,
               const double[:, ::1] w_blk, const double[:, ::1] eta_blk,
               const double[:, ::1] zeta_blk,
               int t_begin, int max_steps, double blowup_sq,
               double[::1] cost_out, double[::1] xnorm_out):
    """Advance the closed-loop simulation by up to ``max_steps`` steps.

    Returns (steps_done, status, logdet); see the pure-Python twin for the
    step semantics and status codes.
    """
    cdef int n = A.shape[0]
    cdef int m1 = B1.shape[1]
    cdef int m2 = B2.shape[1]
    cdef int d = n + m1 + m2

    u_arr = np.empty(m1, dtype=np.float64)
    v_arr = np.empty(m2, dtype=np.float64)
    z_arr = np.empty(d, dtype=np.float64)
    xn_arr = np.empty(n, dtype=np.float64)
    wv_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] z = z_arr
    cdef double[::1] xn = xn_arr
    cdef double[::1] wv = wv_arr

    cdef int status = STATUS_CHUNK_DONE
    cdef int steps = 0
    cdef double threshold = logdet_start + log(2.0)
    cdef int i, t, ii, jj, j, kk
    cdef double acc, row, cq, cu, cv, cost, xsq, xnsq, zi, xi
    cdef double lkk, wk, r, cc, ss, lik

    for i in range(max_steps):
        t = t_begin + i

        for j in range(m1):
            acc = eta_blk[t, j]
            for kk in range(n):
                acc -= K[j, kk] * x[kk]
            u[j] = acc
        for j in range(m2):
            acc = zeta_blk[t, j]
            for kk in range(n):
                acc -= L[j, kk] * x[kk]
            v[j] = acc

        cq = 0.0
        for ii in range(n):
            row = 0.0
            for jj in range(n):
                row += Q[ii, jj] * x[jj]
            cq += x[ii] * row
        cu = 0.0
        for ii in range(m1):
            row = 0.0
            for jj in range(m1):
                row += Ru[ii, jj] * u[jj]
            cu += u[ii] * row
        cv = 0.0
        for ii in range(m2):
            row = 0.0
            for jj in range(m2):
                row += Rv[ii, jj] * v[jj]
            cv += v[ii] * row
        cost = cq + cu - cv

        xsq = 0.0
        for ii in range(n):
            xsq += x[ii] * x[ii]

        for ii in range(n):
            z[ii] = x[ii]
        for ii in range(m1):
            z[n + ii] = u[ii]
        for ii in range(m2):
            z[n + m1 + ii] = v[ii]

        for ii in range(n):
            acc = w_blk[t, ii]
            for jj in range(n):
                acc += A[ii, jj] * x[jj]
            for jj in range(m1):
                acc += B1[ii, jj] * u[jj]
            for jj in range(m2):
                acc += B2[ii, jj] * v[jj]
            xn[ii] = acc

        for ii in range(d):
            zi = z[ii]
            for jj in range(d):
                V[ii, jj] += zi * z[jj]
        for ii in range(n):
            xi = xn[ii]
            for jj in range(d):
                S[ii, jj] += xi * z[jj]

        for ii in range(d):
            wv[ii] = z[ii]
        for kk in range(d):
            lkk = chol[kk, kk]
            wk = wv[kk]
            r = sqrt(lkk * lkk + wk * wk)
            cc = r / lkk
            ss = wk / lkk
            chol[kk, kk] = r
            for ii in range(kk + 1, d):
                lik = (chol[ii, kk] + ss * wv[ii]) / cc
                chol[ii, kk] = lik
                wv[ii] = cc * wv[ii] - ss * lik
        acc = 0.0
        for kk in range(d):
            acc += log(chol[kk, kk])
        logdet = 2.0 * acc

        cost_out[t] = cost
        xnorm_out[t] = sqrt(xsq)
        for ii in range(n):
            x[ii] = xn[ii]
        steps = i + 1

        xnsq = 0.0
        for ii in range(n):
            xnsq += xn[ii] * xn[ii]
        if xnsq > blowup_sq:
            status = STATUS_BLOWUP
            break
        if logdet >= threshold:
            status = STATUS_TRIGGER
            break

    return steps, status, logdet
