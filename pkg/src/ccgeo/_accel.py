"""Numba switch.

Set ``CCGEO_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
The flag is read once, at import time.
"""
import os

_off = os.environ.get("CCGEO_DISABLE_NUMBA", "").strip().lower()
JIT_ENABLED = _off not in ("1", "true", "yes", "on")

if JIT_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a hard dependency
        JIT_ENABLED = False

if JIT_ENABLED:

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        if func is not None:
            return _njit(**kwargs)(func)
        return _njit(**kwargs)

else:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper
