"""Backend selection for the hot loops.

Set ``DPDSA_NUMBA=0`` in the environment to force the pure-numpy path.
"""

import os

_flag = os.environ.get("DPDSA_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off")

try:
    if not _wanted:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _wanted


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if not USE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _njit(*args, **kwargs)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
