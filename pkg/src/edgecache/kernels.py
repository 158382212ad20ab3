"""Kernel backend selection.

The compiled extension is used when importable; set ``EDGECACHE_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _pykernels

if os.environ.get("EDGECACHE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

best_responses = _impl.best_responses
knapsack_tables = _impl.knapsack_tables

__all__ = ["BACKEND", "best_responses", "knapsack_tables"]
