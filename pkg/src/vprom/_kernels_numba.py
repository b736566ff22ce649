"""Numba-compiled force/tangent assembly kernels (default path).

Loop twins of ``_kernels_numpy`` with identical signatures and semantics.
"""

import numpy as np
from numba import njit

BW_TOL = 1.0e-12
BW_MAX_ITER = 50
ETA_MIN = 1.0e-9


@njit(cache=True)
def _bw_advance_scalar(z0, eps0, v, ts, A, beta, gamma, w, dnu, deta):
    # returns (z1, eps1, dz_dv, ok)
    if ts == 0.0:
        return z0, eps0, 0.0, 1

    pred = ts * A * v
    z = z0 + pred
    scale = 1.0 + abs(z0) + abs(pred)
    converged = False
    for _ in range(BW_MAX_ITER):
        eps = eps0 + ts * z * v
        nu = 1.0 + dnu * eps
        eta = 1.0 + deta * eps
        if eta <= ETA_MIN:
            return z, eps, 0.0, 0
        az = abs(z)
        azw1 = az ** (w - 1.0)
        hy = beta * abs(v) * z * azw1 + gamma * v * az * azw1
        zdot = (A * v - nu * hy) / eta
        phi = z - z0 - ts * zdot
        if abs(phi) <= BW_TOL * scale:
            converged = True
            break
        sz = 0.0
        if z > 0.0:
            sz = 1.0
        elif z < 0.0:
            sz = -1.0
        hy_z = w * azw1 * (beta * abs(v) + gamma * v * sz)
        nu_z = dnu * ts * v
        eta_z = deta * ts * v
        dphi = (
            1.0
            - ts * (-(nu_z) * hy - nu * hy_z) / eta
            + ts * (A * v - nu * hy) * eta_z / (eta * eta)
        )
        if abs(dphi) < 1.0e-30:
            return z, eps, 0.0, 0
        z = z - phi / dphi
    ok = 1
    if not converged:
        ok = 0

    eps = eps0 + ts * z * v
    nu = 1.0 + dnu * eps
    eta = 1.0 + deta * eps
    az = abs(z)
    azw1 = az ** (w - 1.0)
    sz = 0.0
    if z > 0.0:
        sz = 1.0
    elif z < 0.0:
        sz = -1.0
    sv = 0.0
    if v > 0.0:
        sv = 1.0
    elif v < 0.0:
        sv = -1.0
    hy = beta * abs(v) * z * azw1 + gamma * v * az * azw1
    hy_z = w * azw1 * (beta * abs(v) + gamma * v * sz)
    hy_v = beta * sv * z * azw1 + gamma * az * azw1
    nu_z = dnu * ts * v
    eta_z = deta * ts * v
    nu_v = dnu * ts * z
    eta_v = deta * ts * z
    dphi_dz = (
        1.0
        - ts * (-(nu_z) * hy - nu * hy_z) / eta
        + ts * (A * v - nu * hy) * eta_z / (eta * eta)
    )
    dphi_dv = (
        -ts * (A - nu_v * hy - nu * hy_v) / eta
        + ts * (A * v - nu * hy) * eta_v / (eta * eta)
    )
    dz_dv = -dphi_dv / dphi_dz
    return z, eps, dz_dv, ok


@njit(cache=True)
def full_force_tangent(
    ia,
    ib,
    klink,
    alpha,
    bwA,
    bwB,
    bwG,
    bwW,
    dnu,
    deta,
    u,
    udot,
    z_prev,
    eps_prev,
    ts,
    a1,
    want_tangent,
    use_elastic,
):
    n = u.shape[0]
    L = ia.shape[0]
    g = np.zeros(n)
    K = np.zeros((n, n))
    z_new = np.empty(L)
    eps_new = np.empty(L)
    for i in range(L):
        a_idx = ia[i]
        b_idx = ib[i]
        ua = 0.0
        va = 0.0
        if a_idx < n:
            ua = u[a_idx]
            va = udot[a_idx]
        du = u[b_idx] - ua
        dv = udot[b_idx] - va
        z1, eps1, dz_dv, ok = _bw_advance_scalar(
            z_prev[i], eps_prev[i], dv, ts, bwA[i], bwB[i], bwG[i], bwW[i], dnu[i], deta[i]
        )
        z_new[i] = z1
        eps_new[i] = eps1
        if ok == 0:
            return g, K, z_new, eps_new, 0
        R = alpha[i] * klink[i] * du + (1.0 - alpha[i]) * klink[i] * z1
        g[b_idx] += R
        if a_idx < n:
            g[a_idx] -= R
        if want_tangent:
            if use_elastic:
                kt = klink[i] * (alpha[i] + (1.0 - alpha[i]) * bwA[i])
            else:
                kt = klink[i] * (alpha[i] + (1.0 - alpha[i]) * dz_dv * a1)
            K[b_idx, b_idx] += kt
            if a_idx < n:
                K[a_idx, a_idx] += kt
                K[b_idx, a_idx] -= kt
                K[a_idx, b_idx] -= kt
    return g, K, z_new, eps_new, 1


@njit(cache=True)
def reduced_force_tangent(
    D,
    rows,
    wrow,
    klink,
    alpha,
    bwA,
    bwB,
    bwG,
    bwW,
    dnu,
    deta,
    q,
    qd,
    z_prev,
    eps_prev,
    ts,
    a1,
    want_tangent,
    use_elastic,
):
    r = q.shape[0]
    g = np.zeros(r)
    K = np.zeros((r, r))
    z_new = z_prev.copy()
    eps_new = eps_prev.copy()
    for s in range(rows.shape[0]):
        i = rows[s]
        du = 0.0
        dv = 0.0
        for m in range(r):
            du += D[i, m] * q[m]
            dv += D[i, m] * qd[m]
        z1, eps1, dz_dv, ok = _bw_advance_scalar(
            z_prev[i], eps_prev[i], dv, ts, bwA[i], bwB[i], bwG[i], bwW[i], dnu[i], deta[i]
        )
        if ok == 0:
            return g, K, z_new, eps_new, 0
        z_new[i] = z1
        eps_new[i] = eps1
        R = alpha[i] * klink[i] * du + (1.0 - alpha[i]) * klink[i] * z1
        wr = wrow[s] * R
        for m in range(r):
            g[m] += wr * D[i, m]
        if want_tangent:
            if use_elastic:
                kt = klink[i] * (alpha[i] + (1.0 - alpha[i]) * bwA[i])
            else:
                kt = klink[i] * (alpha[i] + (1.0 - alpha[i]) * dz_dv * a1)
            wk = wrow[s] * kt
            for m in range(r):
                dm = wk * D[i, m]
                for l in range(r):
                    K[m, l] += dm * D[i, l]
    return g, K, z_new, eps_new, 1
