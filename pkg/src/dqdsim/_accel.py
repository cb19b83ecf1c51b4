"""Backend selection for the hot kernels.

The numba path is used when numba imports cleanly and ``DQDSIM_NUMBA`` is not
set to a false value (``0``, ``false``, ``no``, ``off``). Every kernel also has
a vectorized numpy implementation that is always available.
"""
import os

_FALSE = {"0", "false", "no", "off"}


def _numba_requested():
    return os.environ.get("DQDSIM_NUMBA", "1").strip().lower() not in _FALSE


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    HAVE_NUMBA = False


def use_numba():
    """True when kernels should dispatch to the numba implementation."""
    return HAVE_NUMBA and _numba_requested()


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if use_numba() else "numpy"
