"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``CPP_PREDICT_PURE=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CPP_PREDICT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py

solve_scaled = _impl.solve_scaled
objective_scaled_mean = _impl.objective_scaled_mean

# Shared pure-Python pieces used regardless of the backend.
term_constants = _kernels_py.term_constants
objective = _kernels_py.objective
grid_refine = _kernels_py.grid_refine
