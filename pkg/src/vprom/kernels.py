"""Public kernel entry points, bound to the selected backend at import time."""

from .accel import ENV_FLAG, load_kernel_module, numba_disabled

_mod, BACKEND = load_kernel_module()

bw_advance = getattr(_mod, "bw_advance", None)
full_force_tangent = _mod.full_force_tangent
reduced_force_tangent = _mod.reduced_force_tangent

__all__ = [
    "BACKEND",
    "ENV_FLAG",
    "full_force_tangent",
    "reduced_force_tangent",
    "numba_disabled",
]
