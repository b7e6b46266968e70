"""Optional numba acceleration.

Hot kernels are written once as plain loops and decorated with :func:`njit`.
When numba is unavailable, or ``QFW_DISABLE_NUMBA`` is set to a truthy value,
the decorator is the identity and callers dispatch to the vectorized numpy
implementations instead (plain-Python loops would be far too slow).
"""
import os

_FLAG = os.environ.get("QFW_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("disabled by QFW_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)

except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def _wrap(fn):
            return fn

        return _wrap


def use_numba():
    """True when the compiled kernels are active."""
    return HAVE_NUMBA
