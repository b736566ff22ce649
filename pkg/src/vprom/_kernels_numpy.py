"""Pure-numpy force/tangent assembly kernels (fallback path).

Per Newton iteration the integrator needs, for the current displacement and
velocity iterate, the assembled restoring force, the consistent tangent, and
the backward-Euler advance of every active Bouc-Wen link DOF.  These are the
hot operations; ``_kernels_numba`` holds the compiled twins with identical
signatures and semantics.
"""

import numpy as np

BW_TOL = 1.0e-12
BW_MAX_ITER = 50
ETA_MIN = 1.0e-9


def bw_advance(z0, eps0, v, ts, A, beta, gamma, w, dnu, deta):
    """Backward-Euler update of the hysteretic variable over one (sub)step.

    Solves, per link DOF,  z1 = z0 + ts * zdot(z1, v, eps1(z1))  with
    eps1 = eps0 + ts*z1*v, by a safeguarded scalar Newton iteration applied
    vectorially.  Returns (z1, eps1, dz_dv, ok); ok=0 flags either runaway
    degradation (eta <= 0) or a non-converged update.
    """
    z0 = np.asarray(z0, dtype=float)
    v = np.asarray(v, dtype=float)
    if ts == 0.0:
        return z0.copy(), np.asarray(eps0, dtype=float).copy(), np.zeros_like(z0), 1

    pred = ts * A * v
    z = z0 + pred
    scale = 1.0 + np.abs(z0) + np.abs(pred)
    converged = np.zeros(z.shape, dtype=bool)
    ok = 1
    for _ in range(BW_MAX_ITER):
        eps = eps0 + ts * z * v
        nu = 1.0 + dnu * eps
        eta = 1.0 + deta * eps
        if np.any(eta <= ETA_MIN):
            return z, eps, np.zeros_like(z), 0
        az = np.abs(z)
        azw1 = az ** (w - 1.0)
        hy = beta * np.abs(v) * z * azw1 + gamma * v * az * azw1
        zdot = (A * v - nu * hy) / eta
        phi = z - z0 - ts * zdot
        converged = np.abs(phi) <= BW_TOL * scale
        if converged.all():
            break
        hy_z = w * azw1 * (beta * np.abs(v) + gamma * v * np.sign(z))
        nu_z = dnu * ts * v
        eta_z = deta * ts * v
        dphi = (
            1.0
            - ts * (-(nu_z) * hy - nu * hy_z) / eta
            + ts * (A * v - nu * hy) * eta_z / (eta * eta)
        )
        tiny = np.abs(dphi) < 1.0e-30
        if np.any(tiny & ~converged):
            return z, eps, np.zeros_like(z), 0
        step = np.where(converged | tiny, 0.0, phi / np.where(tiny, 1.0, dphi))
        z = z - step
    if not converged.all():
        ok = 0

    eps = eps0 + ts * z * v
    nu = 1.0 + dnu * eps
    eta = 1.0 + deta * eps
    az = np.abs(z)
    azw1 = az ** (w - 1.0)
    hy = beta * np.abs(v) * z * azw1 + gamma * v * az * azw1
    hy_z = w * azw1 * (beta * np.abs(v) + gamma * v * np.sign(z))
    hy_v = beta * np.sign(v) * z * azw1 + gamma * az * azw1
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
    """Full-order assembled restoring force and tangent.

    ia/ib index the lower/upper DOF of each link DOF row; index n (== len(u))
    is the ground slot.  Returns (g, K, z_new, eps_new, ok).
    """
    n = u.shape[0]
    ue = np.empty(n + 1)
    ue[:n] = u
    ue[n] = 0.0
    ve = np.empty(n + 1)
    ve[:n] = udot
    ve[n] = 0.0
    du = ue[ib] - ue[ia]
    dv = ve[ib] - ve[ia]

    z1, eps1, dz_dv, ok = bw_advance(z_prev, eps_prev, dv, ts, bwA, bwB, bwG, bwW, dnu, deta)
    g = np.zeros(n)
    K = np.zeros((n, n))
    if not ok:
        return g, K, z1, eps1, 0

    R = alpha * klink * du + (1.0 - alpha) * klink * z1
    ge = np.zeros(n + 1)
    np.add.at(ge, ib, R)
    np.add.at(ge, ia, -R)
    g = ge[:n]

    if want_tangent:
        if use_elastic:
            kt = klink * (alpha + (1.0 - alpha) * bwA)
        else:
            kt = klink * (alpha + (1.0 - alpha) * dz_dv * a1)
        Ke = np.zeros((n + 1, n + 1))
        np.add.at(Ke, (ib, ib), kt)
        np.add.at(Ke, (ia, ia), kt)
        np.add.at(Ke, (ib, ia), -kt)
        np.add.at(Ke, (ia, ib), -kt)
        K = np.ascontiguousarray(Ke[:n, :n])
    return g, K, z1, eps1, 1


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
    """Reduced restoring force and tangent over the weighted element rows.

    D holds the per-link-DOF reduced direction vectors (rows of V at the upper
    DOF minus rows at the lower DOF); ``rows`` selects the active link DOFs
    and ``wrow`` carries their ECSW weights (all ones for plain assembly).
    Returns (g_red, K_red, z_new, eps_new, ok); states outside ``rows`` are
    carried over unchanged.
    """
    r = q.shape[0]
    Ds = D[rows]
    du = Ds @ q
    dv = Ds @ qd

    z1r, eps1r, dz_dv, ok = bw_advance(
        z_prev[rows],
        eps_prev[rows],
        dv,
        ts,
        bwA[rows],
        bwB[rows],
        bwG[rows],
        bwW[rows],
        dnu[rows],
        deta[rows],
    )
    z_new = z_prev.copy()
    eps_new = eps_prev.copy()
    g = np.zeros(r)
    K = np.zeros((r, r))
    if not ok:
        return g, K, z_new, eps_new, 0
    z_new[rows] = z1r
    eps_new[rows] = eps1r

    a = alpha[rows]
    kl = klink[rows]
    R = a * kl * du + (1.0 - a) * kl * z1r
    g = (wrow * R) @ Ds

    if want_tangent:
        if use_elastic:
            kt = kl * (a + (1.0 - a) * bwA[rows])
        else:
            kt = kl * (a + (1.0 - a) * dz_dv * a1)
        K = (Ds * (wrow * kt)[:, None]).T @ Ds
    return g, K, z_new, eps_new, 1
