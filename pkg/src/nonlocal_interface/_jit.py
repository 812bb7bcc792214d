"""JIT switch for the hot loops.

Kernels are decorated with :func:`njit`. When numba is importable and the
environment variable ``NONLOCAL_INTERFACE_NO_JIT`` is unset (or ``0``), the
decorator compiles in nopython mode. Otherwise it returns the function
unchanged so the same code runs under the interpreter on plain numpy arrays.
"""
import os
import warnings

_FLAG = "NONLOCAL_INTERFACE_NO_JIT"


class PerformanceWarning(UserWarning):
    pass


def _jit_requested():
    return os.environ.get(_FLAG, "0").strip().lower() not in ("1", "true", "yes", "on")


HAVE_NUMBA = False
if _jit_requested():
    try:
        from numba import njit as _numba_njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba not importable; running kernels without JIT", PerformanceWarning)

JIT_ENABLED = HAVE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity otherwise.

    Supports both ``@njit`` and ``@njit(cache=True)`` forms.
    """
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        if len(args) == 1 and callable(args[0]):
            return _numba_njit(**kwargs)(args[0])
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]

    def deco(func):
        return func

    return deco


__all__ = ["njit", "JIT_ENABLED", "HAVE_NUMBA", "PerformanceWarning"]
