import numpy as np
import pytest

from vprom.frame import BoucWenParams, BoucWenTrace, ExcitationSpec, FomSolution, FrameConfig
from vprom.reduction import (
    ReductionBasis,
    assemble_snapshots,
    compute_coefficients,
    orthonormalize,
    pod_basis,
)
from vprom.simulate import simulate_fom


def fake_solution(u):
    u = np.asarray(u, dtype=float)
    zeros = np.zeros_like(u)
    trace = BoucWenTrace(z=np.zeros((u.shape[0], 1)), eps_energy=np.zeros((u.shape[0], 1)))
    return FomSolution(times=np.arange(u.shape[0]) * 0.1, u=u, u_dot=zeros, u_ddot=zeros,
                       link_states=trace)


class TestSnapshots:
    def test_single_solution_block(self):
        u = np.arange(12.0).reshape(3, 4)  # 3 steps, 4 dofs
        snaps = assemble_snapshots([fake_solution(u)])
        np.testing.assert_array_equal(snaps.matrix, u.T)
        assert snaps.n_steps == 3 and snaps.n_samples == 1

    def test_two_solutions_stack_in_order(self):
        u1 = np.ones((3, 2))
        u2 = 2 * np.ones((3, 2))
        snaps = assemble_snapshots([fake_solution(u1), fake_solution(u2)])
        assert snaps.matrix.shape == (2, 6)
        np.testing.assert_array_equal(snaps.block(0), u1.T)
        np.testing.assert_array_equal(snaps.block(1), u2.T)

    def test_permuting_inputs_permutes_blocks(self):
        u1 = np.random.default_rng(0).normal(size=(4, 3))
        u2 = np.random.default_rng(1).normal(size=(4, 3))
        a = assemble_snapshots([fake_solution(u1), fake_solution(u2)])
        b = assemble_snapshots([fake_solution(u2), fake_solution(u1)])
        np.testing.assert_array_equal(a.block(0), b.block(1))
        np.testing.assert_array_equal(a.block(1), b.block(0))

    def test_shape_mismatch_names_offender(self):
        u1 = np.ones((3, 2))
        u2 = np.ones((4, 2))
        with pytest.raises(ValueError, match="solution 1"):
            assemble_snapshots([fake_solution(u1), fake_solution(u2)])


class TestPodBasis:
    def test_rank_one_matrix_single_mode(self):
        a = np.array([1.0, 2.0, -1.0])
        b = np.array([0.5, 1.0, 0.2, -0.3])
        S = 3.0 * np.outer(a, b)
        basis = pod_basis(S, r=1)
        direction = a / np.linalg.norm(a)
        # sign convention: largest-magnitude entry positive
        assert abs(abs(basis.modes[:, 0] @ direction) - 1.0) < 1e-12
        assert basis.energy_fraction == pytest.approx(1.0)

    def test_orthonormal_columns(self):
        S = np.random.default_rng(2).normal(size=(20, 50))
        basis = pod_basis(S, r=6)
        np.testing.assert_allclose(basis.modes.T @ basis.modes, np.eye(6), atol=1e-10)

    def test_eckart_young_residual_identity(self):
        # ||S - V_r S_r Z_r^T||_F equals sqrt(sum of squared tail singular values)
        S = np.random.default_rng(3).normal(size=(20, 50))
        U, sv, Vt = np.linalg.svd(S, full_matrices=False)
        r = 7
        approx = U[:, :r] @ np.diag(sv[:r]) @ Vt[:r]
        residual = np.linalg.norm(S - approx)
        tail = np.sqrt(np.sum(sv[r:] ** 2))
        assert abs(residual - tail) < 1e-10
        basis = pod_basis(S, r=r)
        np.testing.assert_allclose(basis.singular_values, sv[:r])

    def test_energy_threshold_truncation(self):
        U = np.linalg.qr(np.random.default_rng(4).normal(size=(10, 10)))[0]
        sv = np.array([10.0, 5.0, 1.0, 0.1, 0.01, 0, 0, 0, 0, 0])
        S = U @ np.diag(sv) @ np.linalg.qr(np.random.default_rng(5).normal(size=(10, 10)))[0]
        total = np.sum(sv**2)
        target = np.sum(sv[:2] ** 2) / total
        basis = pod_basis(S, energy=target - 1e-12)
        assert basis.r == 2

    def test_energy_fraction_monotone_in_r(self):
        S = np.random.default_rng(6).normal(size=(15, 40))
        fractions = [pod_basis(S, r=r).energy_fraction for r in range(1, 10)]
        assert all(b >= a for a, b in zip(fractions, fractions[1:]))

    def test_rank_clamp_warns(self):
        S = np.outer(np.arange(1.0, 5.0), np.arange(1.0, 7.0))  # rank 1
        with pytest.warns(RuntimeWarning, match="clamping"):
            basis = pod_basis(S, r=3)
        assert basis.r == 1

    def test_requires_exactly_one_truncation_rule(self):
        S = np.eye(3)
        with pytest.raises(ValueError):
            pod_basis(S)
        with pytest.raises(ValueError):
            pod_basis(S, r=2, energy=0.9)


class TestCoefficients:
    def test_subset_columns_give_identity_block(self):
        Vg = np.linalg.qr(np.random.default_rng(0).normal(size=(12, 6)))[0]
        Vl = Vg[:, :3]
        X = compute_coefficients(Vl, Vg).X
        np.testing.assert_allclose(X[:3], np.eye(3), atol=1e-12)
        np.testing.assert_allclose(X[3:], 0.0, atol=1e-12)

    def test_orthogonal_local_basis_gives_zero(self):
        Q = np.linalg.qr(np.random.default_rng(1).normal(size=(10, 10)))[0]
        Vg, Vl = Q[:, :4], Q[:, 4:7]
        X = compute_coefficients(Vl, Vg).X
        np.testing.assert_allclose(X, 0.0, atol=1e-12)

    def test_projection_residual_identity(self):
        # ||Vg X - Vl||_F equals the orthogonal-complement residual
        rng = np.random.default_rng(2)
        Vg = np.linalg.qr(rng.normal(size=(20, 8)))[0]
        Vl = np.linalg.qr(rng.normal(size=(20, 3)))[0]
        X = compute_coefficients(Vl, Vg).X
        lhs = np.linalg.norm(Vg @ X - Vl)
        rhs = np.linalg.norm((np.eye(20) - Vg @ Vg.T) @ Vl)
        assert abs(lhs - rhs) < 1e-10

    def test_row_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compute_coefficients(np.eye(4), np.eye(5))


class TestOrthonormalize:
    def test_output_orthonormal_and_deterministic(self):
        M = np.random.default_rng(3).normal(size=(10, 4))
        Q1 = orthonormalize(M)
        Q2 = orthonormalize(M)
        np.testing.assert_allclose(Q1.T @ Q1, np.eye(4), atol=1e-12)
        np.testing.assert_array_equal(Q1, Q2)

    def test_preserves_span(self):
        M = np.random.default_rng(4).normal(size=(10, 4))
        Q = orthonormalize(M)
        resid = M - Q @ (Q.T @ M)
        assert np.linalg.norm(resid) < 1e-10


class TestPersistenceRoundtrip:
    def test_basis_orthonormal_after_container_roundtrip(self, tmp_path):
        from vprom.containers import load_array, save_array

        config = FrameConfig(
            n_stories=3, dofs_per_story=2, story_masses=2.0e3,
            direction_scales=(1.0, 0.7),
            boucwen_base=BoucWenParams(alpha=0.4, k=1e7, beta=15.0, gamma=5.0),
        )
        spec = ExcitationSpec(amp=2e5, f_but=10.0, noise_seed=3, dt=0.005, duration=0.5)
        sol = simulate_fom(config, None, spec)
        basis = pod_basis(assemble_snapshots([sol]), r=3)
        path = tmp_path / "v.vprm"
        save_array(path, basis.modes)
        modes = load_array(path)
        np.testing.assert_array_equal(modes, basis.modes)
        np.testing.assert_allclose(modes.T @ modes, np.eye(3), atol=1e-10)
