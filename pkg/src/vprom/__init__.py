"""Parametric projection-based reduced-order modeling of hysteretic
structural dynamics with local-basis libraries: MAC-guided clustering,
Grassmann coefficient interpolation, and conditional-VAE basis generation,
plus ECSW hyper-reduction and latent-sampling uncertainty quantification."""

__version__ = "0.1.0"

from .frame import (
    BoucWenParams,
    BoucWenState,
    ConfigurationError,
    ExcitationSpec,
    FomSolution,
    FrameConfig,
    IntegrationError,
    boucwen_rate,
    generate_excitation,
    restoring_force,
)
from .reduction import (
    CoefficientMatrix,
    ReductionBasis,
    RomSolution,
    SnapshotSet,
    assemble_snapshots,
    compute_coefficients,
    pod_basis,
    rom_simulate,
)
from .sampling import ParameterDomain, ParameterSample, denormalize, lhs_sample, normalize
from .simulate import simulate_fom

__all__ = [
    "BoucWenParams",
    "BoucWenState",
    "CoefficientMatrix",
    "ConfigurationError",
    "ExcitationSpec",
    "FomSolution",
    "FrameConfig",
    "IntegrationError",
    "ParameterDomain",
    "ParameterSample",
    "ReductionBasis",
    "RomSolution",
    "SnapshotSet",
    "assemble_snapshots",
    "boucwen_rate",
    "compute_coefficients",
    "denormalize",
    "generate_excitation",
    "lhs_sample",
    "normalize",
    "pod_basis",
    "restoring_force",
    "rom_simulate",
    "simulate_fom",
]
