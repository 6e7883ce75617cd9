"""Numba switch.

Set ``SCENEGRAPH_SLAM_DISABLE_NUMBA=1`` to run every kernel through its
pure-numpy path (useful for debugging and for environments without numba).
"""

import os

_flag = os.environ.get("SCENEGRAPH_SLAM_DISABLE_NUMBA", "").strip().lower()
JIT_ENABLED = _flag not in ("1", "true", "yes", "on")

if JIT_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False

if not JIT_ENABLED:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper


__all__ = ["JIT_ENABLED", "njit"]
