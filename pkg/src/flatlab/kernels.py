"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``FLATLAB_PURE_PYTHON`` is set to a non-empty value, the
pure-Python twin is used. Both produce identical results.
"""
import os

from . import _kernels_py

BACKEND = "python"
if not os.environ.get("FLATLAB_PURE_PYTHON"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

rauzy_zorich_run = _impl.rauzy_zorich_run
windtree_run = _impl.windtree_run

__all__ = ["BACKEND", "rauzy_zorich_run", "windtree_run"]
