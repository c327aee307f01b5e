"""Pure-Python step kernel: the per-step simulation hot loop.

This is the fallback twin of the compiled kernel in ``_stepper_cy``.  The
two implementations perform the same floating-point operations in the same
order (plain left-to-right accumulation, no fused multiply-add), so traces
agree between backends.  Any change to the loop body here must be mirrored
in ``_stepper_cy.pyx``.

Status codes returned by :func:`step_chunk`:
  0  chunk exhausted (max_steps processed, no event)
  1  episode trigger fired (log det grew by log 2)
  2  state blow-up (post-step squared norm above threshold)
"""

from __future__ import annotations

from math import log, sqrt

import numpy as np

LN2 = log(2.0)

STATUS_CHUNK_DONE = 0
STATUS_TRIGGER = 1
STATUS_BLOWUP = 2


def chol_rank1_update(Lrows: list, w: list) -> None:
    """In-place rank-one update of a lower Cholesky factor: LL' += w w'.

    ``w`` is consumed as scratch.
    """
    d = len(w)
    for k in range(d):
        lkk = Lrows[k][k]
        wk = w[k]
        r = sqrt(lkk * lkk + wk * wk)
        c = r / lkk
        s = wk / lkk
        Lrows[k][k] = r
        row_k = k
        for i in range(k + 1, d):
            lik = (Lrows[i][row_k] + s * w[i]) / c
            Lrows[i][row_k] = lik
            w[i] = c * w[i] - s * lik


def design_rank1(V: np.ndarray, S: np.ndarray, chol: np.ndarray, z, x_next) -> float:
    """Single design update V += zz', S += x_next z', rank-one chol; returns new logdet."""
    d = V.shape[0]
    n = S.shape[0]
    zl = [float(v) for v in z]
    xl = [float(v) for v in x_next]
    Vl = V.tolist()
    Sl = S.tolist()
    Ll = chol.tolist()
    for i in range(d):
        zi = zl[i]
        for j in range(d):
            Vl[i][j] += zi * zl[j]
    for i in range(n):
        xi = xl[i]
        for j in range(d):
            Sl[i][j] += xi * zl[j]
    chol_rank1_update(Ll, list(zl))
    logdet = 0.0
    for k in range(d):
        logdet += log(Ll[k][k])
    logdet *= 2.0
    V[:, :] = Vl
    S[:, :] = Sl
    chol[:, :] = Ll
    return logdet


def step_chunk(
    x: np.ndarray,
    V: np.ndarray,
    S: np.ndarray,
    chol: np.ndarray,
    logdet: float,
    logdet_start: float,
    A: np.ndarray,
    B1: np.ndarray,
    B2: np.ndarray,
    K: np.ndarray,
    L: np.ndarray,
    Q: np.ndarray,
    Ru: np.ndarray,
    Rv: np.ndarray,
    w_blk: np.ndarray,
    eta_blk: np.ndarray,
    zeta_blk: np.ndarray,
    t_begin: int,
    max_steps: int,
    blowup_sq: float,
    cost_out: np.ndarray,
    xnorm_out: np.ndarray,
):
    """Advance the closed-loop simulation by up to ``max_steps`` steps.

    Per step t: apply u = -Kx + eta_t, v = -Lx + zeta_t, record the stage
    cost and ||x_t||, step the plant, and fold (z_t, x_{t+1}) into the
    design state (V, S, chol, logdet).  Stops early on the doubling trigger
    or on state blow-up.  Returns (steps_done, status, logdet).
    """
    n = A.shape[0]
    m1 = B1.shape[1]
    m2 = B2.shape[1]
    d = n + m1 + m2

    Al = A.tolist()
    B1l = B1.tolist()
    B2l = B2.tolist()
    Kl = K.tolist()
    Ll_gain = L.tolist()
    Ql = Q.tolist()
    Rul = Ru.tolist()
    Rvl = Rv.tolist()
    wl = w_blk.tolist()
    etal = eta_blk.tolist()
    zetal = zeta_blk.tolist()
    xl = x.tolist()
    Vl = V.tolist()
    Sl = S.tolist()
    Lc = chol.tolist()

    costs = []
    xnorms = []
    status = STATUS_CHUNK_DONE
    steps = 0
    threshold = logdet_start + LN2

    for i in range(max_steps):
        t = t_begin + i
        eta_t = etal[t]
        zeta_t = zetal[t]
        w_t = wl[t]

        u = [0.0] * m1
        for j in range(m1):
            acc = eta_t[j]
            for kk in range(n):
                acc -= Kl[j][kk] * xl[kk]
            u[j] = acc
        v = [0.0] * m2
        for j in range(m2):
            acc = zeta_t[j]
            for kk in range(n):
                acc -= Ll_gain[j][kk] * xl[kk]
            v[j] = acc

        cq = 0.0
        for ii in range(n):
            row = 0.0
            for jj in range(n):
                row += Ql[ii][jj] * xl[jj]
            cq += xl[ii] * row
        cu = 0.0
        for ii in range(m1):
            row = 0.0
            for jj in range(m1):
                row += Rul[ii][jj] * u[jj]
            cu += u[ii] * row
        cv = 0.0
        for ii in range(m2):
            row = 0.0
            for jj in range(m2):
                row += Rvl[ii][jj] * v[jj]
            cv += v[ii] * row
        cost = cq + cu - cv

        xsq = 0.0
        for ii in range(n):
            xsq += xl[ii] * xl[ii]

        z = xl + u + v

        xn = [0.0] * n
        for ii in range(n):
            acc = w_t[ii]
            for jj in range(n):
                acc += Al[ii][jj] * xl[jj]
            for jj in range(m1):
                acc += B1l[ii][jj] * u[jj]
            for jj in range(m2):
                acc += B2l[ii][jj] * v[jj]
            xn[ii] = acc

        for ii in range(d):
            zi = z[ii]
            Vrow = Vl[ii]
            for jj in range(d):
                Vrow[jj] += zi * z[jj]
        for ii in range(n):
            xi = xn[ii]
            Srow = Sl[ii]
            for jj in range(d):
                Srow[jj] += xi * z[jj]

        chol_rank1_update(Lc, list(z))
        acc = 0.0
        for kk in range(d):
            acc += log(Lc[kk][kk])
        logdet = 2.0 * acc

        costs.append(cost)
        xnorms.append(sqrt(xsq))
        xl = xn
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

    x[:] = xl
    V[:, :] = Vl
    S[:, :] = Sl
    chol[:, :] = Lc
    cost_out[t_begin : t_begin + steps] = costs
    xnorm_out[t_begin : t_begin + steps] = xnorms
    return steps, status, logdet
