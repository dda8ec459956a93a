"""Backend selection for the 3D Henon inner loops.

The compiled extension ``_kernels`` is used when it was built; otherwise the
pure-Python module with the same functions is used. Setting the environment
variable ``LORENZ_FORGE_PURE=1`` forces the fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

#: Every importable backend, for benchmarks and cross-checks.
BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

if _compiled is None or os.environ.get("LORENZ_FORGE_PURE", "") not in ("", "0"):
    BACKEND = "python"
else:
    BACKEND = "cython"
_impl = BACKENDS[BACKEND]

ESCAPED = _kernels_py.ESCAPED
NONFINITE = _kernels_py.NONFINITE

iterate = _impl.iterate
first_return = _impl.first_return
lyapunov = _impl.lyapunov
