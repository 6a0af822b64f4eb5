"""Backend selection for the hot numeric kernels.

The environment variable ``GPSWARM_BACKEND`` picks the implementation:

* ``numba`` -- require the JIT backend, fail loudly if numba is missing;
* ``numpy`` -- force the pure-numpy reference path;
* ``auto`` or unset -- numba when importable, numpy otherwise.

``benchmarks/bench_backends.py`` compares the two side by side.
"""

import os
import warnings

from . import np_ops

_choice = os.environ.get("GPSWARM_BACKEND", "auto").lower()

if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"GPSWARM_BACKEND must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = np_ops
    BACKEND = "numpy"
else:
    try:
        from . import nb_ops as _impl

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise RuntimeError("GPSWARM_BACKEND=numba but numba is not importable")
        warnings.warn("numba unavailable, falling back to the numpy backend")
        _impl = np_ops
        BACKEND = "numpy"

se_cross = _impl.se_cross
consensus_sweep = _impl.consensus_sweep
entity_map = _impl.entity_map
signal_many = _impl.signal_many
