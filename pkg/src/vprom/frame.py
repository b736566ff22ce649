"""Desk-scale parametric full-order benchmark: an N-story shear frame whose
inter-story links carry Bouc-Wen hysteresis, driven by filtered-noise base
excitation.

The frame idealization: each story is a lumped mass with ``dofs_per_story``
independent horizontal DOFs; link e connects story e-1 to story e (link 0 to
ground) and couples the matching DOFs of both stories through one Bouc-Wen
element per direction.  The hysteretic restoring force per link DOF is

    R = alpha*k*du + (1-alpha)*k*z

with the internal variable z evolving as

    z' = (A*du' - nu(t)*(beta*|du'|*z*|z|^(w-1) + gamma*du'*|z|^w)) / eta(t)
    nu(t) = 1 + delta_nu*eps(t),  eta(t) = 1 + delta_eta*eps(t),
    eps'(t) = z*du'
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

#: reference Young's modulus: parameter samples scale link stiffness by E/E_REF
E_REF = 210.0e9


class ConfigurationError(ValueError):
    """Invalid frame / excitation configuration."""


class IntegrationError(RuntimeError):
    """The nonlinear time integrator failed to converge."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoucWenParams:
    """Constitutive parameters of one Bouc-Wen link element."""

    alpha: float = 0.5  # post-yield to elastic stiffness ratio
    k: float = 1.0e8  # stiffness coefficient [N/m]
    A: float = 1.0
    beta: float = 15.0
    gamma: float = 5.0
    w: float = 1.0
    delta_nu: float = 0.0  # strength deterioration coefficient
    delta_eta: float = 0.0  # stiffness degradation coefficient

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.k <= 0.0:
            raise ConfigurationError(f"k must be positive, got {self.k}")
        if self.w < 1.0:
            raise ConfigurationError(f"w must be >= 1, got {self.w}")
        if self.alpha < 1.0 and self.beta + self.gamma <= 0.0:
            raise ConfigurationError("beta + gamma must be positive when hysteresis is active")


@dataclass
class BoucWenState:
    """Point-in-time state of all Bouc-Wen link DOFs."""

    z: np.ndarray  # hysteretic displacement per link DOF [m]
    eps_energy: np.ndarray  # absorbed hysteretic energy per link DOF
    delta_nu: float = 0.0
    delta_eta: float = 0.0

    @property
    def nu(self) -> np.ndarray:
        return 1.0 + self.delta_nu * self.eps_energy

    @property
    def eta_deg(self) -> np.ndarray:
        return 1.0 + self.delta_eta * self.eps_energy

    @classmethod
    def zeros(cls, n_link_dofs: int, delta_nu: float = 0.0, delta_eta: float = 0.0):
        return cls(
            z=np.zeros(n_link_dofs),
            eps_energy=np.zeros(n_link_dofs),
            delta_nu=delta_nu,
            delta_eta=delta_eta,
        )


@dataclass
class BoucWenTrace:
    """Committed per-step link-state history of one integration run."""

    z: np.ndarray  # (N_t, n_link_dofs)
    eps_energy: np.ndarray  # (N_t, n_link_dofs)
    delta_nu: float = 0.0
    delta_eta: float = 0.0

    def final_state(self) -> BoucWenState:
        return BoucWenState(
            z=self.z[-1].copy(),
            eps_energy=self.eps_energy[-1].copy(),
            delta_nu=self.delta_nu,
            delta_eta=self.delta_eta,
        )


@dataclass
class FrameConfig:
    """Geometry, inertia and link layout of the shear frame."""

    n_stories: int
    dofs_per_story: int = 1
    story_masses: np.ndarray | float = 1.0e5  # [kg], scalar or (n_stories,)
    direction_scales: tuple[float, ...] | None = None  # stiffness multiplier per DOF direction
    excitation_direction: tuple[float, ...] | None = None  # per-story load direction components
    rayleigh_damping: tuple[float, float] | None = None  # (a0, a1): C = a0*M + a1*K0
    links: tuple[tuple[int | None, int], ...] | None = None  # (lower story | None=ground, upper)
    link_stiffness_scales: np.ndarray | float = 1.0  # per-link multiplier (grading)
    boucwen_base: BoucWenParams = field(default_factory=BoucWenParams)

    def __post_init__(self):
        if self.n_stories < 1:
            raise ConfigurationError("n_stories must be >= 1")
        if self.dofs_per_story < 1:
            raise ConfigurationError("dofs_per_story must be >= 1")
        masses = np.broadcast_to(
            np.asarray(self.story_masses, dtype=float), (self.n_stories,)
        ).copy()
        if np.any(masses <= 0.0):
            raise ConfigurationError("all story masses must be positive")
        self.story_masses = masses
        if self.direction_scales is None:
            self.direction_scales = (1.0,) * self.dofs_per_story
        if len(self.direction_scales) != self.dofs_per_story:
            raise ConfigurationError("direction_scales length must equal dofs_per_story")
        if self.excitation_direction is None:
            # equal components per direction, unit norm (theta = pi/4 for 2 DOFs)
            c = 1.0 / math.sqrt(self.dofs_per_story)
            self.excitation_direction = (c,) * self.dofs_per_story
        if len(self.excitation_direction) != self.dofs_per_story:
            raise ConfigurationError("excitation_direction length must equal dofs_per_story")
        nrm = math.sqrt(sum(c * c for c in self.excitation_direction))
        if nrm <= 0.0:
            raise ConfigurationError("excitation_direction must be nonzero")
        self.excitation_direction = tuple(c / nrm for c in self.excitation_direction)
        if self.links is None:
            self.links = tuple(
                (None if s == 0 else s - 1, s) for s in range(self.n_stories)
            )
        for lo, hi in self.links:
            if not 0 <= hi < self.n_stories:
                raise ConfigurationError(f"link upper story {hi} out of range")
            if lo is not None and not 0 <= lo < self.n_stories:
                raise ConfigurationError(f"link lower story {lo} out of range")
        scales = np.broadcast_to(
            np.asarray(self.link_stiffness_scales, dtype=float), (self.n_links,)
        ).copy()
        if np.any(scales <= 0.0):
            raise ConfigurationError("link stiffness scales must be positive")
        self.link_stiffness_scales = scales
        self.boucwen_base.validate()

    @property
    def n_dofs(self) -> int:
        return self.n_stories * self.dofs_per_story

    @property
    def n_links(self) -> int:
        return len(self.links)

    def dof_index(self, story: int, direction: int) -> int:
        return story * self.dofs_per_story + direction

    def influence_vector(self) -> np.ndarray:
        """Map the scalar ground-excitation series to the full DOF vector."""
        iota = np.zeros(self.n_dofs)
        for s in range(self.n_stories):
            for j in range(self.dofs_per_story):
                iota[self.dof_index(s, j)] = self.excitation_direction[j]
        return iota

    def to_dict(self) -> dict:
        return {
            "n_stories": self.n_stories,
            "dofs_per_story": self.dofs_per_story,
            "story_masses": np.asarray(self.story_masses).tolist(),
            "direction_scales": list(self.direction_scales),
            "excitation_direction": list(self.excitation_direction),
            "rayleigh_damping": (
                list(self.rayleigh_damping) if self.rayleigh_damping is not None else None
            ),
            "link_stiffness_scales": np.asarray(self.link_stiffness_scales).tolist(),
            "boucwen_base": {
                "alpha": self.boucwen_base.alpha,
                "k": self.boucwen_base.k,
                "A": self.boucwen_base.A,
                "beta": self.boucwen_base.beta,
                "gamma": self.boucwen_base.gamma,
                "w": self.boucwen_base.w,
                "delta_nu": self.boucwen_base.delta_nu,
                "delta_eta": self.boucwen_base.delta_eta,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameConfig":
        d = dict(d)
        bw = d.pop("boucwen_base", None)
        kwargs = {}
        for key in (
            "n_stories",
            "dofs_per_story",
            "story_masses",
            "rayleigh_damping",
            "link_stiffness_scales",
        ):
            if key in d:
                kwargs[key] = d[key]
        for key in ("direction_scales", "excitation_direction"):
            if d.get(key) is not None:
                kwargs[key] = tuple(d[key])
        if kwargs.get("rayleigh_damping") is not None:
            kwargs["rayleigh_damping"] = tuple(kwargs["rayleigh_damping"])
        if bw is not None:
            kwargs["boucwen_base"] = BoucWenParams(**bw)
        return cls(**kwargs)


@dataclass(frozen=True)
class ExcitationSpec:
    """Filtered-white-noise base excitation."""

    amp: float  # amplitude factor applied after filtering
    f_but: float  # Butterworth low-pass cutoff [Hz]
    noise_seed: int
    dt: float  # timestep [s]
    duration: float  # total time [s]

    def validate(self) -> None:
        if self.dt <= 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.duration < self.dt:
            raise ConfigurationError("duration must be at least one timestep")
        nyquist = 0.5 / self.dt
        if not 0.0 < self.f_but < nyquist:
            raise ConfigurationError(
                f"cutoff f_but={self.f_but} Hz must lie in (0, {nyquist}) Hz (Nyquist)"
            )

    @property
    def n_steps(self) -> int:
        """Number of samples, including t=0."""
        return int(round(self.duration / self.dt)) + 1

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt

    def with_overrides(self, amp: float | None = None, f_but: float | None = None):
        changes = {}
        if amp is not None:
            changes["amp"] = amp
        if f_but is not None:
            changes["f_but"] = f_but
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        return {
            "amp": self.amp,
            "f_but": self.f_but,
            "noise_seed": self.noise_seed,
            "dt": self.dt,
            "duration": self.duration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExcitationSpec":
        return cls(**d)


@dataclass
class FomSolution:
    """Full-order response history of one simulation."""

    times: np.ndarray  # (N_t,)
    u: np.ndarray  # (N_t, n) displacement
    u_dot: np.ndarray  # (N_t, n) velocity
    u_ddot: np.ndarray  # (N_t, n) acceleration
    link_states: BoucWenTrace
    wall_time: float = 0.0
    newton_iterations: int = 0

    @property
    def n_steps(self) -> int:
        return self.u.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.u.shape[1]


# ---------------------------------------------------------------------------
# excitation
# ---------------------------------------------------------------------------


def butterworth_lowpass(series: np.ndarray, f_but: float, dt: float) -> np.ndarray:
    """Second-order discrete Butterworth low-pass (bilinear transform, zero
    initial filter state, unit DC gain)."""
    nyquist = 0.5 / dt
    if not 0.0 < f_but < nyquist:
        raise ConfigurationError(
            f"cutoff f_but={f_but} Hz must lie in (0, {nyquist}) Hz (Nyquist)"
        )
    b, a = signal.butter(2, f_but, btype="low", fs=1.0 / dt)
    return signal.lfilter(b, a, np.asarray(series, dtype=float))


def generate_excitation(spec: ExcitationSpec) -> np.ndarray:
    """Seeded white noise, low-pass filtered, scaled by ``spec.amp``."""
    spec.validate()
    if spec.amp == 0.0:
        return np.zeros(spec.n_steps)
    rng = np.random.default_rng(spec.noise_seed)
    noise = rng.standard_normal(spec.n_steps)
    return spec.amp * butterworth_lowpass(noise, spec.f_but, spec.dt)


# ---------------------------------------------------------------------------
# reference Bouc-Wen operations (continuous-time law; the integrator kernels
# implement the discrete backward-Euler counterpart)
# ---------------------------------------------------------------------------


def boucwen_rate(state: BoucWenState, du_dot, params: BoucWenParams):
    """Rates (z', eps') of the hysteresis law at the given state.

    Raises IntegrationError when the degradation factor eta(t) is no longer
    positive (runaway degradation).
    """
    du_dot = np.asarray(du_dot, dtype=float)
    z = np.asarray(state.z, dtype=float)
    nu = np.asarray(state.nu, dtype=float)
    eta = np.asarray(state.eta_deg, dtype=float)
    if np.any(eta <= 0.0):
        raise IntegrationError("eta(t) <= 0: runaway stiffness degradation")
    az = np.abs(z)
    azw1 = az ** (params.w - 1.0)
    hyst = params.beta * np.abs(du_dot) * z * azw1 + params.gamma * du_dot * az * azw1
    z_dot = (params.A * du_dot - nu * hyst) / eta
    eps_dot = z * du_dot
    return z_dot, eps_dot


def restoring_force(du, state: BoucWenState, params: BoucWenParams):
    """Link restoring force R = alpha*k*du + (1-alpha)*k*z."""
    du = np.asarray(du, dtype=float)
    return params.alpha * params.k * du + (1.0 - params.alpha) * params.k * np.asarray(state.z)


def assemble_global_force(
    config: FrameConfig, link_forces: np.ndarray
) -> np.ndarray:
    """Scatter per-link-DOF restoring forces (n_links, d) into the global
    force vector via the link layout."""
    d = config.dofs_per_story
    g = np.zeros(config.n_dofs)
    forces = np.asarray(link_forces, dtype=float).reshape(config.n_links, d)
    for e, (lo, hi) in enumerate(config.links):
        for j in range(d):
            g[config.dof_index(hi, j)] += forces[e, j]
            if lo is not None:
                g[config.dof_index(lo, j)] -= forces[e, j]
    return g
