"""Snapshot assembly, POD basis extraction, coefficient matrices and the
Galerkin-reduced time integrator."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .frame import BoucWenTrace, ExcitationSpec, FomSolution, FrameConfig, generate_excitation
from .integrate import (
    DEFAULT_MAX_HALVINGS,
    DEFAULT_MAX_ITER,
    DEFAULT_REL_TOL,
    SecondOrderSystem,
    newmark_integrate,
)
from .simulate import (
    LinkArrays,
    build_link_arrays,
    damping_matrix,
    mass_matrix,
    resolve_parameters,
)

#: relative singular-value floor defining the numerical rank in truncation
RANK_RTOL = 1.0e-12


@dataclass
class SnapshotSet:
    """Per-sample displacement histories stacked column-wise."""

    matrix: np.ndarray  # (n, N_t * N_s)
    n_steps: int
    n_samples: int

    def block(self, i: int) -> np.ndarray:
        return self.matrix[:, i * self.n_steps : (i + 1) * self.n_steps]


@dataclass
class ReductionBasis:
    """Orthonormal projection basis with its singular-value metadata."""

    modes: np.ndarray  # (n, r)
    singular_values: np.ndarray  # (r,)
    energy_fraction: float
    provenance: str = "pod"

    @property
    def r(self) -> int:
        return self.modes.shape[1]

    def check_orthonormal(self, tol: float = 1.0e-10) -> bool:
        v = self.modes
        return bool(np.linalg.norm(v.T @ v - np.eye(v.shape[1])) <= tol * max(1, v.shape[1]))


@dataclass
class CoefficientMatrix:
    """Local basis expressed in global-basis coordinates: V_i = V_global X_i."""

    X: np.ndarray  # (r_global, r)
    sample: object = None  # owning ParameterSample


@dataclass
class RomSolution:
    """Reduced trajectory plus the reconstructed full-order fields."""

    times: np.ndarray
    q: np.ndarray  # (N_t, r)
    u: np.ndarray  # (N_t, n)
    u_dot: np.ndarray
    u_ddot: np.ndarray
    basis_provenance: str
    link_states: BoucWenTrace | None = None
    wall_time: float = 0.0
    newton_iterations: int = 0
    reduced_history: dict = field(default_factory=dict)


def assemble_snapshots(solutions: list[FomSolution]) -> SnapshotSet:
    """Stack displacement histories U(p_i), one n x N_t block per sample, in
    the given order."""
    if not solutions:
        raise ValueError("at least one solution is required")
    n = solutions[0].n_dofs
    n_steps = solutions[0].n_steps
    blocks = []
    for i, sol in enumerate(solutions):
        if sol.n_dofs != n or sol.n_steps != n_steps:
            raise ValueError(
                f"solution {i} has shape ({sol.n_steps}, {sol.n_dofs}), "
                f"expected ({n_steps}, {n})"
            )
        blocks.append(sol.u.T)
    return SnapshotSet(matrix=np.hstack(blocks), n_steps=n_steps, n_samples=len(solutions))


def pod_basis(
    snapshots,
    r: int | None = None,
    energy: float | None = None,
    provenance: str = "pod",
) -> ReductionBasis:
    """Left singular vectors of the snapshot matrix, truncated either to a
    fixed mode count ``r`` or to the smallest count reaching the retained
    ``energy`` fraction (of squared singular values)."""
    S = snapshots.matrix if isinstance(snapshots, SnapshotSet) else np.asarray(snapshots, dtype=float)
    if S.size == 0:
        raise ValueError("empty snapshot matrix")
    if (r is None) == (energy is None):
        raise ValueError("specify exactly one of r / energy")
    U, sv, _ = np.linalg.svd(S, full_matrices=False)
    total = float(np.sum(sv**2))
    if total == 0.0:
        raise ValueError("snapshot matrix is identically zero")
    numerical_rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    if energy is not None:
        cum = np.cumsum(sv**2) / total
        r_eff = int(np.searchsorted(cum, energy) + 1)
        r_eff = min(r_eff, numerical_rank)
    else:
        r_eff = int(r)
        if r_eff > numerical_rank:
            warnings.warn(
                f"requested r={r_eff} exceeds numerical rank {numerical_rank}; clamping",
                RuntimeWarning,
                stacklevel=2,
            )
            r_eff = numerical_rank
    kept = sv[:r_eff]
    modes = np.ascontiguousarray(U[:, :r_eff])
    # deterministic mode orientation: largest-magnitude entry positive (POD
    # signs are otherwise arbitrary and vary across nearby samples)
    for c in range(r_eff):
        peak = int(np.argmax(np.abs(modes[:, c])))
        if modes[peak, c] < 0.0:
            modes[:, c] = -modes[:, c]
    return ReductionBasis(
        modes=modes,
        singular_values=kept.copy(),
        energy_fraction=float(np.sum(kept**2) / total),
        provenance=provenance,
    )


def compute_coefficients(v_local, v_global, sample=None) -> CoefficientMatrix:
    """Least-squares projection X = V_global^T V_local (exact when the local
    span is contained in the global span)."""
    Vl = v_local.modes if isinstance(v_local, ReductionBasis) else np.asarray(v_local)
    Vg = v_global.modes if isinstance(v_global, ReductionBasis) else np.asarray(v_global)
    if Vl.shape[0] != Vg.shape[0]:
        raise ValueError("local and global bases must share the row dimension")
    return CoefficientMatrix(X=Vg.T @ Vl, sample=sample)


def orthonormalize(M: np.ndarray) -> np.ndarray:
    """Thin QR with the R diagonal sign fixed (deterministic orientation)."""
    Q, R = np.linalg.qr(M)
    signs = np.sign(np.diag(R))
    signs[signs == 0.0] = 1.0
    return Q * signs


# ---------------------------------------------------------------------------
# reduced-order integration
# ---------------------------------------------------------------------------


def reduced_directions(V: np.ndarray, links: LinkArrays) -> np.ndarray:
    """Per-link-DOF reduced direction rows: D[i] = V[ib_i] - V[ia_i]
    (ground rows contribute zero)."""
    n = V.shape[0]
    Ve = np.vstack([V, np.zeros((1, V.shape[1]))])
    return np.ascontiguousarray(Ve[links.ib] - Ve[links.ia])


def _reduced_assemble(D, links: LinkArrays, rows, wrow):
    def assemble(q, qd, z, eps, ts, a1, want_tangent, use_elastic):
        return kernels.reduced_force_tangent(
            D,
            rows,
            wrow,
            links.klink,
            links.alpha,
            links.bwA,
            links.bwB,
            links.bwG,
            links.bwW,
            links.dnu,
            links.deta,
            q,
            qd,
            z,
            eps,
            ts,
            a1,
            want_tangent,
            use_elastic,
        )

    return assemble


def expand_element_weights(weights, links: LinkArrays):
    """Map per-element ECSW weights onto active link-DOF rows.

    Returns (rows, wrow): indices of rows whose owning element has nonzero
    weight, and the weight per row.  ``weights=None`` selects the plain full
    assembly: all rows with unit weight.
    """
    if weights is None:
        rows = np.arange(links.n_rows, dtype=np.int64)
        return rows, np.ones(links.n_rows)
    xi = np.asarray(weights, dtype=float)
    if xi.shape[0] != links.n_elements:
        raise ValueError(
            f"weight vector length {xi.shape[0]} != number of elements {links.n_elements}"
        )
    w_per_row = xi[links.element_of_row]
    rows = np.flatnonzero(w_per_row != 0.0).astype(np.int64)
    return rows, np.ascontiguousarray(w_per_row[rows])


def rom_simulate(
    config: FrameConfig,
    sample,
    spec: ExcitationSpec,
    basis: ReductionBasis,
    hyper_weights=None,
    rel_tol: float = DEFAULT_REL_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    u0: np.ndarray | None = None,
    v0: np.ndarray | None = None,
    excitation: np.ndarray | None = None,
) -> RomSolution:
    """Galerkin-reduced integration with the same Newmark/Newton scheme as
    the full-order solver; nonlinear forces are assembled at full order (or
    over ECSW-weighted elements) and projected."""
    V = basis.modes
    bw, k_scale, eff_spec = resolve_parameters(sample, config, spec)
    eff_spec.validate()
    links = build_link_arrays(config, bw, k_scale)
    series = generate_excitation(eff_spec) if excitation is None else np.asarray(excitation, dtype=float)
    if series.shape[0] != eff_spec.n_steps:
        raise ValueError("excitation length mismatch")

    M = mass_matrix(config)
    C = damping_matrix(config, links)
    D = reduced_directions(V, links)
    rows, wrow = expand_element_weights(hyper_weights, links)

    system = SecondOrderSystem(
        mass=V.T @ M @ V,
        damping=None if C is None else V.T @ C @ V,
        force_pattern=V.T @ config.influence_vector(),
        assemble=_reduced_assemble(D, links, rows, wrow),
        n_state_rows=links.n_rows,
    )
    q0 = None if u0 is None else V.T @ np.asarray(u0, dtype=float)
    qd0 = None if v0 is None else V.T @ np.asarray(v0, dtype=float)

    t_start = time.perf_counter()
    res = newmark_integrate(
        system,
        series,
        eff_spec.dt,
        x0=q0,
        v0=qd0,
        rel_tol=rel_tol,
        max_iter=max_iter,
        max_halvings=max_halvings,
    )
    wall = time.perf_counter() - t_start

    trace = BoucWenTrace(z=res.z, eps_energy=res.eps, delta_nu=bw.delta_nu, delta_eta=bw.delta_eta)
    return RomSolution(
        times=eff_spec.times(),
        q=res.x,
        u=res.x @ V.T,
        u_dot=res.xd @ V.T,
        u_ddot=res.xdd @ V.T,
        basis_provenance=basis.provenance,
        link_states=trace,
        wall_time=wall,
        newton_iterations=res.newton_iterations,
    )
