"""MAC-guided adaptive clustering of local bases and nearest-neighbor
cluster selection at query time."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reduction import ReductionBasis


def mac(w_r: np.ndarray, w_s: np.ndarray) -> float:
    """Modal assurance criterion |w_r.w_s|^2 / (|w_r|^2 |w_s|^2) in [0, 1]."""
    w_r = np.asarray(w_r, dtype=float).ravel()
    w_s = np.asarray(w_s, dtype=float).ravel()
    nr = float(w_r @ w_r)
    ns = float(w_s @ w_s)
    if nr == 0.0 or ns == 0.0:
        raise ValueError("MAC is undefined for zero vectors")
    num = float(w_r @ w_s)
    return num * num / (nr * ns)


def basis_similarity(v_a, v_b) -> float:
    """Mean MAC over corresponding truncated modes of two equal-width bases."""
    Va = v_a.modes if isinstance(v_a, ReductionBasis) else np.asarray(v_a)
    Vb = v_b.modes if isinstance(v_b, ReductionBasis) else np.asarray(v_b)
    if Va.shape != Vb.shape:
        raise ValueError(f"basis shapes differ: {Va.shape} vs {Vb.shape}")
    return float(np.mean([mac(Va[:, i], Vb[:, i]) for i in range(Va.shape[1])]))


@dataclass
class ClusterLibrary:
    """Cluster centers with per-training-sample assignments."""

    center_indices: list[int]  # indices into the training list
    center_samples: list  # ParameterSample per center
    center_bases: list  # ReductionBasis per center
    assignments: np.ndarray  # training index -> cluster id
    similarities: np.ndarray  # similarity of each training basis to its center
    mac_tolerance: float
    max_clusters: int
    training_normalized: np.ndarray = field(default=None)  # (N_s, dim) query space
    training_cluster: np.ndarray = field(default=None)  # == assignments (persisted view)

    @property
    def n_clusters(self) -> int:
        return len(self.center_indices)

    def basis_for(self, cluster: int) -> ReductionBasis:
        return self.center_bases[cluster]


def _assign_all(bases, center_ids):
    n = len(bases)
    assignments = np.zeros(n, dtype=np.int64)
    sims = np.zeros(n)
    for i in range(n):
        best_c, best_s = 0, -1.0
        for c, ci in enumerate(center_ids):
            s = basis_similarity(bases[i], bases[ci])
            if s > best_s:
                best_c, best_s = c, s
        assignments[i] = best_c
        sims[i] = best_s
    return assignments, sims


def adaptive_cluster(
    training: list,
    mac_tolerance: float = 0.25,
    max_clusters: int = 8,
    refine_callback=None,
) -> ClusterLibrary:
    """Greedy MAC-guided clustering of (sample, basis) training pairs.

    Starts from the sample nearest the domain centroid, assigns every basis to
    its most similar center, and promotes the worst-assigned basis to a new
    center while its similarity falls below 1 - mac_tolerance and the cluster
    cap is not reached.  ``refine_callback(center_sample, worst_sample)`` may
    return extra (sample, basis) pairs to densify the training set between a
    center and its worst member; they are appended before reassignment.
    """
    if not training:
        raise ValueError("at least one training pair is required")
    if not 0.0 < mac_tolerance < 1.0:
        raise ValueError("mac_tolerance must lie in (0, 1)")
    pairs = list(training)
    samples = [p for p, _ in pairs]
    bases = [b for _, b in pairs]

    norm = np.stack([np.asarray(s.normalized, dtype=float) for s in samples])
    centroid_dist = np.linalg.norm(norm - norm.mean(axis=0), axis=1)
    center_ids = [int(np.argmin(centroid_dist))]

    assignments, sims = _assign_all(bases, center_ids)
    while len(center_ids) < max_clusters:
        worst = int(np.argmin(sims))
        if sims[worst] >= 1.0 - mac_tolerance:
            break
        if worst in center_ids:
            break
        if refine_callback is not None:
            center_of_worst = center_ids[assignments[worst]]
            extra = refine_callback(samples[center_of_worst], samples[worst]) or []
            for s, b in extra:
                samples.append(s)
                bases.append(b)
            if extra:
                norm = np.stack([np.asarray(s.normalized, dtype=float) for s in samples])
        center_ids.append(worst)
        assignments, sims = _assign_all(bases, center_ids)

    return ClusterLibrary(
        center_indices=center_ids,
        center_samples=[samples[i] for i in center_ids],
        center_bases=[bases[i] for i in center_ids],
        assignments=assignments,
        similarities=sims,
        mac_tolerance=mac_tolerance,
        max_clusters=max_clusters,
        training_normalized=norm,
        training_cluster=assignments.copy(),
    )


def select_cluster(library: ClusterLibrary, p_query, k: int = 3) -> int:
    """Majority vote among the k nearest training samples in normalized
    parameter space; ties go to the tied cluster holding the nearest member."""
    if library.n_clusters == 0:
        raise ValueError("empty cluster library")
    if k < 1:
        raise ValueError("k must be >= 1")
    qn = np.asarray(
        p_query.normalized if hasattr(p_query, "normalized") else p_query, dtype=float
    )
    pts = library.training_normalized
    d = np.linalg.norm(pts - qn, axis=1)
    order = np.argsort(d, kind="stable")
    k_eff = min(k, len(order))
    nearest = order[:k_eff]
    votes = np.bincount(library.assignments[nearest], minlength=library.n_clusters)
    top = np.flatnonzero(votes == votes.max())
    if len(top) == 1:
        return int(top[0])
    for idx in nearest:  # in increasing-distance order
        c = int(library.assignments[idx])
        if c in top:
            return c
    return int(top[0])
