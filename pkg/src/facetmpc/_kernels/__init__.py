"""Kernel selection: compiled simplex core with a pure-NumPy fallback.

The compiled extension is preferred when importable; set the environment
variable ``FACETMPC_PURE_PYTHON=1`` before import to force the fallback
(useful for benchmarking and debugging).
"""

import os

from . import _simplex_py

OPTIMAL = _simplex_py.OPTIMAL
INFEASIBLE = _simplex_py.INFEASIBLE
UNBOUNDED = _simplex_py.UNBOUNDED
STALLED = _simplex_py.STALLED


def _select(prefer_compiled):
    if prefer_compiled:
        try:
            from . import _simplex

            return _simplex, "compiled"
        except ImportError:
            pass
    return _simplex_py, "python"


_impl, KERNEL_NAME = _select(os.environ.get("FACETMPC_PURE_PYTHON", "0") != "1")
simplex_solve = _impl.simplex_solve
