"""Multi-agent target search simulator with consensus-based distributed GP maps."""

import os

# The simulation is dominated by many small (E x E) factorizations; BLAS
# thread pools only add spin overhead at these sizes. Effective only when
# this package is imported before numpy initializes its backend.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

__version__ = "0.1.0"
