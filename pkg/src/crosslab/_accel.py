"""Backend switch for the compiled kernels.

Set ``CROSSLAB_DISABLE_NUMBA=1`` before import to force the pure-numpy
implementations. When numba is missing the numpy path is used silently.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("CROSSLAB_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_ENABLED = _numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    kwargs.setdefault("cache", True)
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    return _numba.njit(*args, **kwargs)
