"""Hot enumeration kernels.

The compiled extension is used when it was built; otherwise the pure
Python implementation is loaded. Set ``LOGRANK_PURE_PYTHON=1`` to force
the fallback.
"""

import os

from . import _pykernels as python_backend

TARGET_AREA = python_backend.TARGET_AREA
TARGET_MINSIDE = python_backend.TARGET_MINSIDE

compiled_backend = None
if not os.environ.get("LOGRANK_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None



def select(name: str) -> str:
    """Switch the active backend ("python" or "cython"); returns the previous one."""
    global BACKEND, signed_subset_scan, max_biclique_dfs, max_biclique_bnb
    if name == "python":
        mod = python_backend
    elif name in ("cython", "compiled"):
        if compiled_backend is None:
            raise ImportError("compiled kernels are not available")
        mod = compiled_backend
    else:
        raise ValueError(f"unknown backend {name!r}")
    previous = globals().get("BACKEND")
    BACKEND = mod.BACKEND
    signed_subset_scan = mod.signed_subset_scan
    max_biclique_dfs = mod.max_biclique_dfs
    max_biclique_bnb = mod.max_biclique_bnb
    return previous


select("cython" if compiled_backend is not None else "python")

__all__ = [
    "BACKEND",
    "TARGET_AREA",
    "TARGET_MINSIDE",
    "signed_subset_scan",
    "max_biclique_dfs",
    "max_biclique_bnb",
    "python_backend",
    "compiled_backend",
    "select",
]
