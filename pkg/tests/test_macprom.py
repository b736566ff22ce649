import numpy as np
import pytest

from vprom.macprom import ClusterLibrary, adaptive_cluster, basis_similarity, mac, select_cluster
from vprom.reduction import ReductionBasis
from vprom.sampling import ParameterDomain, make_sample

DOM = ParameterDomain(names=("a", "b"), lower=[0.0, 0.0], upper=[1.0, 1.0])


def basis_of(cols):
    M = np.asarray(cols, dtype=float)
    return ReductionBasis(modes=M, singular_values=np.ones(M.shape[1]), energy_fraction=1.0)


class TestMac:
    def test_self_similarity_is_one(self):
        w = np.array([1.0, -2.0, 0.5])
        assert mac(w, w) == pytest.approx(1.0)

    def test_orthogonal_vectors_give_zero(self):
        assert mac(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_scale_invariance(self):
        w = np.array([0.3, -1.0, 2.0])
        assert mac(2.0 * w, w) == pytest.approx(1.0)
        assert mac(w, -5.0 * w) == pytest.approx(1.0)

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = rng.normal(size=6), rng.normal(size=6)
            v = mac(a, b)
            assert 0.0 <= v <= 1.0 + 1e-15
            assert v == pytest.approx(mac(b, a))

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            mac(np.zeros(3), np.ones(3))


class TestBasisSimilarity:
    def test_identical_bases(self):
        V = np.linalg.qr(np.random.default_rng(1).normal(size=(8, 3)))[0]
        assert basis_similarity(V, V) == pytest.approx(1.0)

    def test_sign_flip_invariance(self):
        V = np.linalg.qr(np.random.default_rng(2).normal(size=(8, 3)))[0]
        assert basis_similarity(V, -V) == pytest.approx(1.0)

    def test_columnwise_orthogonal_bases_give_zero(self):
        Va = np.eye(6)[:, :3]
        Vb = np.eye(6)[:, 3:]
        assert basis_similarity(Va, Vb) == 0.0

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError):
            basis_similarity(np.eye(4)[:, :2], np.eye(4)[:, :3])


def two_group_training():
    """Two groups of bases spanning mutually orthogonal subspaces."""
    e = np.eye(8)
    group1 = [e[:, [0, 1]], e[:, [0, 1]] @ np.array([[0.8, -0.6], [0.6, 0.8]])]
    group2 = [e[:, [4, 5]], e[:, [4, 5]] @ np.array([[0.9, 0.436], [-0.436, 0.9]])]
    pts = [[0.1, 0.1], [0.2, 0.1], [0.8, 0.9], [0.9, 0.8]]
    training = []
    for p, M in zip(pts, group1 + group2):
        training.append((make_sample(DOM, p), basis_of(M)))
    return training


def brute_force_two_partition(training):
    """Best 2-partition by total similarity to per-part medoid centers."""
    n = len(training)
    sims = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            sims[i, j] = basis_similarity(training[i][1], training[j][1])
    best, best_score = None, -np.inf
    for mask in range(1, 2 ** (n - 1)):
        part = [(mask >> i) & 1 for i in range(n)]
        score = 0.0
        for side in (0, 1):
            members = [i for i in range(n) if part[i] == side]
            if not members:
                score = -np.inf
                break
            score += max(sum(sims[c, m] for m in members) for c in members)
        if score > best_score:
            best_score, best = score, tuple(part)
    return best


class TestAdaptiveCluster:
    def test_identical_bases_one_cluster(self):
        V = basis_of(np.eye(6)[:, :2])
        training = [(make_sample(DOM, [0.1 * i, 0.5]), V) for i in range(1, 6)]
        lib = adaptive_cluster(training, mac_tolerance=0.05, max_clusters=4)
        assert lib.n_clusters == 1
        assert np.all(lib.assignments == 0)

    def test_two_orthogonal_groups_recover_optimal_partition(self):
        training = two_group_training()
        lib = adaptive_cluster(training, mac_tolerance=0.4, max_clusters=4)
        assert lib.n_clusters == 2
        got = tuple(int(a) for a in lib.assignments)
        optimal = brute_force_two_partition(training)
        # same partition up to label swap
        assert got in (optimal, tuple(1 - g for g in optimal))

    def test_cluster_cap_binds(self):
        training = two_group_training()
        lib = adaptive_cluster(training, mac_tolerance=0.4, max_clusters=1)
        assert lib.n_clusters == 1
        assert np.all(lib.assignments == 0)

    def test_deterministic_given_order(self):
        training = two_group_training()
        a = adaptive_cluster(training, mac_tolerance=0.4, max_clusters=4)
        b = adaptive_cluster(training, mac_tolerance=0.4, max_clusters=4)
        assert a.center_indices == b.center_indices
        assert np.array_equal(a.assignments, b.assignments)

    def test_new_center_raises_minimum_similarity(self):
        training = two_group_training()
        one = adaptive_cluster(training, mac_tolerance=0.0001, max_clusters=1)
        two = adaptive_cluster(training, mac_tolerance=0.4, max_clusters=2)
        assert two.similarities.min() > one.similarities.min()

    def test_refinement_callback_receives_center_and_worst(self):
        training = two_group_training()
        calls = []

        def refine(center_sample, worst_sample):
            calls.append((center_sample, worst_sample))
            return []

        adaptive_cluster(training, mac_tolerance=0.4, max_clusters=4, refine_callback=refine)
        assert len(calls) >= 1

    def test_empty_training_rejected(self):
        with pytest.raises(ValueError):
            adaptive_cluster([], mac_tolerance=0.2, max_clusters=2)


class TestSelectCluster:
    def make_library(self):
        training = two_group_training()
        return adaptive_cluster(training, mac_tolerance=0.4, max_clusters=4), training

    def test_exact_training_hit_with_k1(self):
        lib, training = self.make_library()
        for i, (sample, _) in enumerate(training):
            assert select_cluster(lib, sample, k=1) == lib.assignments[i]

    def test_k_equals_all_returns_most_populous(self):
        lib, training = self.make_library()
        # add an extra member to cluster of training[0] to break the tie
        extra = make_sample(DOM, [0.15, 0.12])
        lib.training_normalized = np.vstack([lib.training_normalized, extra.normalized])
        lib.assignments = np.append(lib.assignments, lib.assignments[0])
        q = make_sample(DOM, [0.5, 0.5])
        assert select_cluster(lib, q, k=len(lib.assignments)) == lib.assignments[0]

    def test_midpoint_query_sides_with_two_nearest(self):
        lib, training = self.make_library()
        # query nearer the second group: its 2 nearest of k=3 vote for group 2
        q = make_sample(DOM, [0.62, 0.62])
        d = np.linalg.norm(lib.training_normalized - q.normalized, axis=1)
        order = np.argsort(d)[:3]
        votes = np.bincount(lib.assignments[order], minlength=lib.n_clusters)
        assert select_cluster(lib, q, k=3) == int(np.argmax(votes))

    def test_invalid_k_rejected(self):
        lib, _ = self.make_library()
        with pytest.raises(ValueError):
            select_cluster(lib, make_sample(DOM, [0.5, 0.5]), k=0)
