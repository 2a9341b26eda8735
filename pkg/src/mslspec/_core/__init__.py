"""Integrator core selection.

The compiled extension is preferred; set ``MSLSPEC_PURE_PYTHON=1`` to force
the numpy fallback (used by the benchmark and the parity tests).
"""

import os

from . import _pykernels

if os.environ.get("MSLSPEC_PURE_PYTHON", "").strip() in ("1", "true", "yes"):
    impl = _pykernels
else:
    try:
        from . import _ckernels as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _pykernels

BACKEND = impl.BACKEND
propagate = impl.propagate

POT_ZERO = _pykernels.POT_ZERO
POT_GRID = _pykernels.POT_GRID
POT_DIAG_EXP = _pykernels.POT_DIAG_EXP
POT_BARGMANN = _pykernels.POT_BARGMANN
