"""Design of experiments: Latin hypercube sampling and parameter scaling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class RangeError(ValueError):
    """A value lies outside its declared parameter bounds."""


@dataclass(frozen=True)
class ParameterDomain:
    """Ordered, bounded parameter box."""

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if len(self.names) != len(set(self.names)):
            raise ValueError("parameter names must be unique")
        if self.lower.shape != self.upper.shape or self.lower.shape != (len(self.names),):
            raise ValueError("bounds must match the number of parameter names")
        if np.any(self.lower >= self.upper):
            raise ValueError("lower bounds must be strictly below upper bounds")

    @property
    def dim(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterDomain":
        return cls(names=tuple(d["names"]), lower=d["lower"], upper=d["upper"])


#: two-story-frame benchmark ranges: alpha, k, amp, f_but, E, delta_eta
def benchmark_domain() -> ParameterDomain:
    return ParameterDomain(
        names=("alpha", "k", "amp", "f_but", "E", "delta_eta"),
        lower=np.array([0.25, 0.8e8, 1.5e6, 5.0, 185.0e9, 0.25]),
        upper=np.array([0.50, 1.2e8, 3.0e6, 15.0, 235.0e9, 0.75]),
    )


@dataclass(frozen=True)
class ParameterSample:
    """One realization of the parameter vector with its [-1, 1] image."""

    names: tuple[str, ...]
    values: np.ndarray
    normalized: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.normalized is not None:
            object.__setattr__(self, "normalized", np.asarray(self.normalized, dtype=float))

    def get(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))


def normalize(domain: ParameterDomain, values: np.ndarray) -> np.ndarray:
    """Affine map of in-bounds values onto [-1, 1]^dim (no silent clipping)."""
    values = np.asarray(values, dtype=float)
    below = values < domain.lower - 1e-300
    above = values > domain.upper + 1e-300
    if np.any(below | above):
        bad = int(np.argmax(below | above) if values.ndim == 1 else 0)
        if values.ndim == 1:
            raise RangeError(
                f"value {values[bad]} for '{domain.names[bad]}' outside "
                f"[{domain.lower[bad]}, {domain.upper[bad]}]"
            )
        raise RangeError("values outside the parameter domain")
    return 2.0 * (values - domain.lower) / (domain.upper - domain.lower) - 1.0


def denormalize(domain: ParameterDomain, normalized: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`normalize`."""
    normalized = np.asarray(normalized, dtype=float)
    return domain.lower + (normalized + 1.0) * 0.5 * (domain.upper - domain.lower)


def make_sample(domain: ParameterDomain, values) -> ParameterSample:
    values = np.asarray(values, dtype=float)
    return ParameterSample(names=domain.names, values=values, normalized=normalize(domain, values))


def lhs_sample(domain: ParameterDomain, n: int, seed: int) -> list[ParameterSample]:
    """Latin hypercube design: per dimension, each of the n equiprobable
    strata holds exactly one point, placed uniformly within its stratum."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    unit = np.empty((n, domain.dim))
    for j in range(domain.dim):
        perm = rng.permutation(n)
        offsets = rng.uniform(size=n)
        unit[:, j] = (perm + offsets) / n
    values = domain.lower + unit * (domain.upper - domain.lower)
    return [make_sample(domain, values[i]) for i in range(n)]


def samples_to_matrix(samples: list[ParameterSample]) -> np.ndarray:
    return np.stack([s.values for s in samples])


def samples_from_matrix(domain: ParameterDomain, values: np.ndarray) -> list[ParameterSample]:
    return [make_sample(domain, row) for row in np.asarray(values, dtype=float)]
