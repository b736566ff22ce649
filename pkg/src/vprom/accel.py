"""Backend selection for the hot assembly kernels.

The integrator's per-iteration force/tangent assembly (including the implicit
Bouc-Wen state advance) exists in two interchangeable implementations:

* ``vprom._kernels_numba`` -- loop kernels compiled with ``numba.njit``
* ``vprom._kernels_numpy`` -- vectorized pure-numpy fallback

The numba path is the default whenever numba imports cleanly.  Setting the
environment variable ``VPROM_DISABLE_NUMBA=1`` before import forces the numpy
path (useful for debugging and for the kernel benchmark).
"""

import os

ENV_FLAG = "VPROM_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


def load_kernel_module():
    """Return (module, backend_name) honoring the env flag."""
    if not numba_disabled():
        try:
            from . import _kernels_numba

            return _kernels_numba, "numba"
        except ImportError:
            pass
    from . import _kernels_numpy

    return _kernels_numpy, "numpy"
