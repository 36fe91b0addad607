"""Compiled fixed-step loop for long untraced runs.

Mirrors ``AMASolver.step`` with ``step_policy="fixed"`` and no diagnostics.
Tests pin it against the numpy path.
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

TIE_TOL = 1e-14


def _fixed_step_loop(A, B, c, beta, dq, den, gc, ulo, uhi, vlo, vhi, eta, accelerated, extrapolated,
                     lam, lam_hat, t, s_weight, u_bar, v_bar, iters):
    n, p1 = A.shape
    p2 = B.shape[1]
    lam = lam.copy()
    lam_hat = lam_hat.copy()
    u_bar = u_bar.copy()
    v_bar = v_bar.copy()
    u = np.empty(p1)
    w = np.empty(n)
    v = np.empty(p2)
    lam_next = np.empty(n)
    for _ in range(iters):
        lh = lam_hat if accelerated else lam
        for j in range(p1):
            s = 0.0
            for i in range(n):
                s += A[i, j] * lh[i]
            x = (dq[j] + s + gc[j]) / den[j]
            u[j] = min(max(x, ulo[j]), uhi[j])
        for i in range(n):
            s = 0.0
            for j in range(p1):
                s += A[i, j] * u[j]
            w[i] = c[i] - s
        for j in range(p2):
            bl = 0.0
            bw = 0.0
            for i in range(n):
                bl += B[i, j] * lh[i]
                bw += B[i, j] * w[i]
            x = (bl + eta * bw) / (eta * beta[j])
            v[j] = min(max(x, vlo[j]), vhi[j])
        for i in range(n):
            s = 0.0
            for j in range(p2):
                s += B[i, j] * v[j]
            lam_next[i] = lh[i] + eta * (w[i] - s)
        weight = eta * t if accelerated else eta
        s_weight += weight
        tau = weight / s_weight
        for j in range(p1):
            u_bar[j] = (1.0 - tau) * u_bar[j] + tau * u[j]
        for j in range(p2):
            td = 0.0
            for i in range(n):
                td += B[i, j] * lam_next[i]
            if abs(td) <= TIE_TOL:
                vt = v[j]
            elif td > 0:
                vt = vhi[j]
            else:
                vt = vlo[j]
            v_bar[j] = (1.0 - tau) * v_bar[j] + tau * vt
        if accelerated:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_next
            for i in range(n):
                base = lh[i] if extrapolated else lam[i]
                lam_hat[i] = lam_next[i] + mom * (lam_next[i] - base)
            t = t_next
        else:
            for i in range(n):
                lam_hat[i] = lam_next[i]
        for i in range(n):
            lam[i] = lam_next[i]
    return lam, lam_hat, t, s_weight, u_bar, v_bar


fixed_step_loop = njit(cache=True)(_fixed_step_loop) if njit is not None else _fixed_step_loop
