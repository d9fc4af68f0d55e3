"""spinlab: two-spin models on regular graphs and trees, Bethe free energies,
exact enumeration, Glauber sampling, and the partition-function to MAX-CUT
reduction through bipartite expander gadgets."""

import os as _os

# the bundled TBB is too old for numba; prefer OpenMP and fall back quietly
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
