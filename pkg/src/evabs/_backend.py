"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python kernels when
the extension is missing or when EVABS_PURE_PYTHON=1 is set (useful for
benchmarks and for debugging suspected extension issues). Import `kernels`
from here; never import a backend module directly outside tests.
"""

import os

if os.environ.get("EVABS_PURE_PYTHON") == "1":
    from evabs import _pykernels as kernels
else:
    try:
        from evabs import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from evabs import _pykernels as kernels  # type: ignore[no-redef]

BACKEND = kernels.BACKEND
