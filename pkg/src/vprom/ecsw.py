"""ECSW hyper-reduction: select sparsely weighted elements whose reduced
internal-force contributions reproduce the full assembly within tolerance.

The training system stacks, over sampled committed states of training ROM
replays, each element's projected restoring-force contribution; the sparse
non-negative weights come from a Lawson-Hanson active-set solve stopped early
at ||G xi - b|| <= tau ||b||.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reduction import RomSolution, reduced_directions
from .simulate import LinkArrays

DEFAULT_TAU = 0.01
DEFAULT_STRIDE = 5


@dataclass
class EcswSystem:
    """G: (n_states * r) x n_elements stacked contributions; b = G @ 1."""

    G: np.ndarray
    b: np.ndarray
    n_states: int
    r: int


@dataclass
class EcswWeights:
    xi: np.ndarray  # dense non-negative weights, one per element
    selected: np.ndarray  # indices of nonzero weights
    tau: float
    residual: float  # achieved ||G xi - b|| / ||b||
    basis_hash: str = ""

    @property
    def n_selected(self) -> int:
        return int(self.selected.size)


def element_reduced_forces(
    D: np.ndarray, links: LinkArrays, q: np.ndarray, z: np.ndarray
) -> np.ndarray:
    """Per-element reduced restoring-force contributions at one committed
    state: row e holds sum_dof R_{e,dof} * D[row], shape (n_elements, r)."""
    du = D @ q
    R = links.alpha * links.klink * du + (1.0 - links.alpha) * links.klink * z
    contrib = R[:, None] * D
    out = np.zeros((links.n_elements, D.shape[1]))
    np.add.at(out, links.element_of_row, contrib)
    return out


def build_ecsw_system(
    solutions: list[RomSolution],
    bases: list,
    links: LinkArrays,
    stride: int = DEFAULT_STRIDE,
) -> EcswSystem:
    """Stack per-element reduced force contributions over strided committed
    states of training replays.  ``bases`` supplies the reduction basis used
    for each solution (one per solution, or a single shared basis)."""
    if not solutions:
        raise ValueError("at least one training solution is required")
    if not isinstance(bases, (list, tuple)):
        bases = [bases] * len(solutions)
    if len(bases) != len(solutions):
        raise ValueError("one basis per solution required")
    blocks = []
    r = None
    for sol, basis in zip(solutions, bases):
        V = basis.modes if hasattr(basis, "modes") else np.asarray(basis)
        if r is None:
            r = V.shape[1]
        elif V.shape[1] != r:
            raise ValueError("all bases must share the reduced dimension")
        D = reduced_directions(V, links)
        for t in range(0, sol.q.shape[0], stride):
            contrib = element_reduced_forces(D, links, sol.q[t], sol.link_states.z[t])
            blocks.append(contrib.T)  # (r, n_elements)
    G = np.vstack(blocks)
    b = G.sum(axis=1)
    return EcswSystem(G=G, b=b, n_states=len(blocks), r=r)


def sparse_nnls(G: np.ndarray, b: np.ndarray, tau: float) -> EcswWeights:
    """Lawson-Hanson active-set non-negative least squares with early stop.

    Adds the element of most-positive gradient correlation, solves the
    restricted least-squares problem, and drops negative entries per the
    classical inner loop; terminates once ||G xi - b|| <= tau ||b|| or at the
    KKT optimum.  Weights are non-negative by construction at every iterate.
    """
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    m, n = G.shape
    norm_b = float(np.linalg.norm(b))
    xi = np.zeros(n)
    if norm_b == 0.0:
        return EcswWeights(xi=xi, selected=np.array([], dtype=int), tau=tau, residual=0.0)

    target = tau * norm_b
    passive: list[int] = []
    resid = b.copy()
    max_outer = 3 * n
    tol_grad = 1.0e-12 * max(1.0, float(np.abs(G).max())) * max(1.0, norm_b)

    for _ in range(max_outer):
        rnorm = float(np.linalg.norm(resid))
        if rnorm <= target:
            break
        wgrad = G.T @ resid
        wgrad[passive] = -np.inf
        j = int(np.argmax(wgrad))
        if wgrad[j] <= tol_grad:
            break  # KKT optimum reached
        passive.append(j)
        while True:
            sub = np.linalg.lstsq(G[:, passive], b, rcond=None)[0]
            if np.all(sub > 0.0):
                break
            # classical step-length rule toward the feasible boundary
            xi_passive = xi[passive]
            mask = sub <= 0.0
            ratios = xi_passive[mask] / (xi_passive[mask] - sub[mask])
            alpha_step = float(np.min(ratios))
            xi_passive = xi_passive + alpha_step * (sub - xi_passive)
            xi_passive[np.abs(xi_passive) < 1.0e-14] = 0.0
            xi[:] = 0.0
            xi[passive] = xi_passive
            passive = [p for p, v in zip(passive, xi_passive) if v > 0.0]
            if not passive:
                break
        if not passive:
            break
        xi[:] = 0.0
        xi[passive] = sub
        assert np.all(xi >= 0.0)
        resid = b - G @ xi
    else:
        # stalled: fall back to the exact full-support solution xi = 1
        xi = np.ones(n)
        resid = b - G @ xi

    rnorm = float(np.linalg.norm(resid))
    if rnorm > target and np.allclose(G.sum(axis=1), b):
        # assembly-identity systems always admit xi = 1 exactly
        xi = np.ones(n)
        rnorm = float(np.linalg.norm(b - G @ xi))
    selected = np.flatnonzero(xi > 0.0)
    return EcswWeights(
        xi=xi, selected=selected, tau=tau, residual=rnorm / norm_b
    )


def hyper_force(
    weights: EcswWeights, D: np.ndarray, links: LinkArrays, q: np.ndarray, z: np.ndarray
) -> np.ndarray:
    """Weighted reduced restoring force g = sum_e xi_e V_e^T g_e(V q)."""
    contrib = element_reduced_forces(D, links, q, z)
    return weights.xi @ contrib
