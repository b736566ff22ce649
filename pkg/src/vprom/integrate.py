"""Implicit Newmark time stepping with Newton-Raphson equilibrium iterations.

One driver serves both the full-order and the Galerkin-reduced system; the
dimension-specific work (force, tangent, Bouc-Wen advance) is delegated to an
``assemble`` callable bound to the selected kernel backend.  Average
acceleration (beta=1/4, gamma=1/2) is the default scheme.  Non-converged
steps are retried with up to ``max_halvings`` levels of substepping before
the run aborts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .frame import IntegrationError

DEFAULT_REL_TOL = 1.0e-8
DEFAULT_MAX_ITER = 30
DEFAULT_MAX_HALVINGS = 4

#: Newton iterations without residual progress before falling back to the
#: initial-stiffness (elastic) iteration matrix.
STALL_LIMIT = 3


@dataclass
class SecondOrderSystem:
    """M x'' + C x' + g(x, x') = force_pattern * s(t) in ``dim`` coordinates."""

    mass: np.ndarray  # (dim, dim)
    damping: np.ndarray | None  # (dim, dim) or None
    force_pattern: np.ndarray  # (dim,)
    assemble: Callable  # (x, xd, z, eps, ts, a1, want_tangent, use_elastic) -> 5-tuple
    n_state_rows: int  # number of Bouc-Wen link DOFs carried in z/eps


@dataclass
class IntegrationResult:
    x: np.ndarray  # (N_t, dim)
    xd: np.ndarray
    xdd: np.ndarray
    z: np.ndarray  # (N_t, n_state_rows)
    eps: np.ndarray
    newton_iterations: int


def _newton_step(system, x_c, xd_c, xdd_c, z_c, eps_c, f_new, h, beta_nm, gamma_nm, rel_tol, max_iter):
    """One implicit step of size h from a committed state; None on failure."""
    b0 = 1.0 / (beta_nm * h * h)
    b1 = gamma_nm / (beta_nm * h)
    b2 = 1.0 / (beta_nm * h)
    b3 = 0.5 / beta_nm - 1.0
    b6 = h * (1.0 - gamma_nm)
    b7 = gamma_nm * h

    mass = system.mass
    damping = system.damping
    x = x_c.copy()
    use_elastic = False
    best_res = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        xdd = b0 * (x - x_c) - b2 * xd_c - b3 * xdd_c
        xd = xd_c + b6 * xdd_c + b7 * xdd
        g, K, z1, eps1, ok = system.assemble(x, xd, z_c, eps_c, h, b1, True, use_elastic)
        if not ok:
            return None
        ma = mass @ xdd
        res = ma + g - f_new
        if damping is not None:
            res += damping @ xd
        rn = float(np.linalg.norm(res))
        ref = max(
            float(np.linalg.norm(f_new)),
            float(np.linalg.norm(g)),
            float(np.linalg.norm(ma)),
        )
        if rn <= rel_tol * ref:
            return x, xd, xdd, z1, eps1, it
        if rn < 0.999 * best_res:
            best_res = rn
            stall = 0
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                use_elastic = True
        k_eff = b0 * mass + K
        if damping is not None:
            k_eff = k_eff + b1 * damping
        x = x + np.linalg.solve(k_eff, -res)
    return None


def newmark_integrate(
    system: SecondOrderSystem,
    s_series: np.ndarray,
    dt: float,
    x0: np.ndarray | None = None,
    v0: np.ndarray | None = None,
    rel_tol: float = DEFAULT_REL_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    beta_nm: float = 0.25,
    gamma_nm: float = 0.5,
) -> IntegrationResult:
    dim = system.mass.shape[0]
    n_steps = len(s_series)
    x_c = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    xd_c = np.zeros(dim) if v0 is None else np.asarray(v0, dtype=float).copy()
    z_c = np.zeros(system.n_state_rows)
    eps_c = np.zeros(system.n_state_rows)

    # consistent initial acceleration from instantaneous equilibrium (ts=0
    # leaves the hysteretic state untouched)
    g0, _, _, _, ok0 = system.assemble(x_c, xd_c, z_c, eps_c, 0.0, 0.0, False, False)
    if not ok0:
        raise IntegrationError("initial state evaluation failed")
    rhs = system.force_pattern * s_series[0] - g0
    if system.damping is not None:
        rhs = rhs - system.damping @ xd_c
    xdd_c = np.linalg.solve(system.mass, rhs)

    x_h = np.zeros((n_steps, dim))
    xd_h = np.zeros((n_steps, dim))
    xdd_h = np.zeros((n_steps, dim))
    z_h = np.zeros((n_steps, system.n_state_rows))
    eps_h = np.zeros((n_steps, system.n_state_rows))
    x_h[0] = x_c
    xd_h[0] = xd_c
    xdd_h[0] = xdd_c
    iters_total = 0

    for step in range(1, n_steps):
        s_prev = s_series[step - 1]
        s_new = s_series[step]
        committed = None
        for level in range(max_halvings + 1):
            nsub = 2**level
            h = dt / nsub
            xs, xds, xdds = x_c, xd_c, xdd_c
            zs, epss = z_c, eps_c
            iters_try = 0
            failed = False
            for isub in range(1, nsub + 1):
                frac = isub / nsub
                f_t = system.force_pattern * (s_prev + (s_new - s_prev) * frac)
                out = _newton_step(
                    system, xs, xds, xdds, zs, epss, f_t, h, beta_nm, gamma_nm, rel_tol, max_iter
                )
                if out is None:
                    failed = True
                    break
                xs, xds, xdds, zs, epss, it = out
                iters_try += it
            if not failed:
                committed = (xs, xds, xdds, zs, epss)
                iters_total += iters_try
                break
        if committed is None:
            raise IntegrationError(
                f"Newton failed at step {step} (t={step * dt:.6g} s) "
                f"after {max_halvings} halving levels"
            )
        x_c, xd_c, xdd_c, z_c, eps_c = committed
        x_h[step] = x_c
        xd_h[step] = xd_c
        xdd_h[step] = xdd_c
        z_h[step] = z_c
        eps_h[step] = eps_c

    return IntegrationResult(x_h, xd_h, xdd_h, z_h, eps_h, iters_total)
