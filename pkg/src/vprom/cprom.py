"""Coefficient-matrix interpolation on the Grassmann tangent space.

Local bases are expressed in global-basis coordinates through coefficient
matrices X_i (columns orthonormal up to truncation leakage).  At a query
parameter, the k nearest coefficient matrices are mapped to the tangent space
at the nearest training point, interpolated element-wise by inverse-distance
weighting, and mapped back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reduction import CoefficientMatrix, ReductionBasis, orthonormalize

EXACT_HIT_DIST = 1.0e-12


class SingularReferenceError(ValueError):
    """The reference subspace is too far from a training subspace for the
    tangent map; advise choosing a different reference."""


@dataclass
class TangentImage:
    """Tangent-space image of one coefficient matrix at the reference point."""

    gamma: np.ndarray  # (r_global, r)
    reference_index: int


def _orthonormal_columns(X: np.ndarray) -> np.ndarray:
    return orthonormalize(np.asarray(X, dtype=float))


def grassmann_log(X_ref, X_i, reference_index: int = 0) -> TangentImage:
    """Tangent image of span(X_i) at span(X_ref) via the thin-SVD logarithm.

    Both inputs are orthonormalized on entry.  Raises SingularReferenceError
    when X_ref^T X_i is numerically singular (subspaces too far apart).
    """
    Xr = _orthonormal_columns(X_ref)
    Xi = _orthonormal_columns(X_i)
    cross = Xr.T @ Xi
    # condition check before inverting
    sv = np.linalg.svd(cross, compute_uv=False)
    if sv[-1] < 1.0e-12:
        raise SingularReferenceError(
            "X_ref^T X_i is singular: subspaces are (nearly) orthogonal; "
            "choose a reference closer to the query"
        )
    M = (Xi - Xr @ cross) @ np.linalg.inv(cross)
    P, S, Qt = np.linalg.svd(M, full_matrices=False)
    gamma = P @ np.diag(np.arctan(S)) @ Qt
    return TangentImage(gamma=gamma, reference_index=reference_index)


def grassmann_exp(X_ref, gamma) -> np.ndarray:
    """Map a tangent image back to a representative with orthonormal columns."""
    Xr = _orthonormal_columns(X_ref)
    G = np.asarray(gamma.gamma if isinstance(gamma, TangentImage) else gamma, dtype=float)
    P, S, Qt = np.linalg.svd(G, full_matrices=False)
    X = Xr @ Qt.T @ np.diag(np.cos(S)) + P @ np.diag(np.sin(S))
    return orthonormalize(X)


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles between the column spans of A and B (oracle helper)."""
    Qa = _orthonormal_columns(A)
    Qb = _orthonormal_columns(B)
    sv = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))


def align_column_signs(X: np.ndarray, X_ref: np.ndarray) -> np.ndarray:
    """Flip column signs of X to maximize diagonal correlation with X_ref;
    POD sign ambiguity otherwise corrupts element-wise interpolation."""
    X = np.asarray(X, dtype=float).copy()
    for c in range(X.shape[1]):
        if X[:, c] @ X_ref[:, c] < 0.0:
            X[:, c] = -X[:, c]
    return X


def align_coefficient_set(training: list) -> list:
    """Orient every coefficient matrix against a common reference (the
    sample nearest the normalized-domain centroid).  Column sign flips leave
    each spanned subspace unchanged but make the set learnable/interpolable."""
    pts = np.stack([np.asarray(s.normalized, dtype=float) for s, _ in training])
    ref = int(np.argmin(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    X_ref = np.asarray(
        training[ref][1].X if isinstance(training[ref][1], CoefficientMatrix) else training[ref][1],
        dtype=float,
    )
    out = []
    for s, c in training:
        X = np.asarray(c.X if isinstance(c, CoefficientMatrix) else c, dtype=float)
        out.append((s, CoefficientMatrix(X=align_column_signs(X, X_ref), sample=s)))
    return out


def interpolate_coefficients(
    training: list,
    p_query,
    k_int: int = 4,
    idw_power: float = 2.0,
) -> np.ndarray:
    """Interpolated coefficient matrix at the query parameter.

    ``training`` holds (ParameterSample, CoefficientMatrix) pairs.  The
    reference is the nearest training sample in normalized space; tangent
    images of the k_int nearest matrices are blended element-wise with
    inverse-distance weights (exact hit short-circuits).
    """
    if len(training) < 2:
        raise ValueError("at least two training pairs are required")
    qn = np.asarray(
        p_query.normalized if hasattr(p_query, "normalized") else p_query, dtype=float
    )
    pts = np.stack([np.asarray(s.normalized, dtype=float) for s, _ in training])
    mats = [c.X if isinstance(c, CoefficientMatrix) else np.asarray(c) for _, c in training]
    d = np.linalg.norm(pts - qn, axis=1)
    order = np.argsort(d, kind="stable")
    ref = int(order[0])
    if d[ref] < EXACT_HIT_DIST:
        return _orthonormal_columns(mats[ref])

    X_ref = _orthonormal_columns(mats[ref])
    k_eff = min(k_int, len(training))
    neighbors = order[:k_eff]
    weights = 1.0 / np.maximum(d[neighbors], EXACT_HIT_DIST) ** idw_power
    weights = weights / weights.sum()

    gamma_acc = np.zeros_like(X_ref)
    for w_i, idx in zip(weights, neighbors):
        if idx == ref:
            continue  # tangent image of the reference is zero
        Xi = align_column_signs(_orthonormal_columns(mats[idx]), X_ref)
        gamma_acc += w_i * grassmann_log(X_ref, Xi, reference_index=ref).gamma
    return grassmann_exp(X_ref, gamma_acc)


def interpolate_basis(
    training: list,
    v_global,
    p_query,
    k_int: int = 4,
    idw_power: float = 2.0,
) -> ReductionBasis:
    """Local basis at the query: V(p) = V_global X_interp, re-orthonormalized."""
    Vg = v_global.modes if isinstance(v_global, ReductionBasis) else np.asarray(v_global)
    X = interpolate_coefficients(training, p_query, k_int=k_int, idw_power=idw_power)
    V = orthonormalize(Vg @ X)
    return ReductionBasis(
        modes=V,
        singular_values=np.zeros(V.shape[1]),
        energy_fraction=float("nan"),
        provenance="cprom",
    )
