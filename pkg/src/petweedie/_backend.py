"""Backend selection for the hot kernels.

Numba is used when importable unless ``PETWEEDIE_DISABLE_NUMBA`` is set to a
truthy value, in which case the vectorised numpy kernels are used.
"""
import os

ENV_FLAG = "PETWEEDIE_DISABLE_NUMBA"


def _flag_set():
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def _numba_importable():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def numba_enabled():
    """Return True when the numba kernels are active."""
    return not _flag_set() and _numba_importable()
