"""Bond-based peridynamic fracture with a nodal finite element
approximation on triangle meshes."""

import os as _os

# the bundled TBB is too old for numba; skip straight to OpenMP
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"


def _configure_threads():
    n = _os.environ.get("NFEAPD_NUM_THREADS")
    if n:
        import numba
        numba.set_num_threads(int(n))


_configure_threads()
