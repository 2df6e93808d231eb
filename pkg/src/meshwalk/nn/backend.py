"""Selects the recurrence kernel implementation at import time.

Two interchangeable kernels exist: a compiled extension (``_gru_cy``) and a
pure-numpy fallback (``_gru_numpy``).  Both export ``gru_seq_forward`` /
``gru_seq_backward`` with identical signatures and semantics, so everything
above this module is backend-agnostic.

The choice is controlled by the ``MESHWALK_BACKEND`` environment variable:

``auto`` (default)
    use the compiled kernel if it imported cleanly, else fall back to numpy
``cython``
    require the compiled kernel; raise if it is unavailable
``numpy``
    force the pure-numpy kernel
"""

import os

from . import _gru_numpy

_ENV_VAR = "MESHWALK_BACKEND"

try:
    from . import _gru_cy
except ImportError:
    _gru_cy = None


def available_backends():
    """Names of the kernels that imported successfully, fastest first."""
    names = []
    if _gru_cy is not None:
        names.append("cython")
    names.append("numpy")
    return names


def _select(choice):
    if choice == "numpy":
        return _gru_numpy
    if choice == "cython":
        if _gru_cy is None:
            raise ImportError(
                "MESHWALK_BACKEND=cython but the compiled kernel is not "
                "available; rebuild the package or use MESHWALK_BACKEND=numpy"
            )
        return _gru_cy
    if choice == "auto":
        return _gru_cy if _gru_cy is not None else _gru_numpy
    raise ValueError(
        f"unknown {_ENV_VAR} value {choice!r}; expected auto, cython or numpy"
    )


def get_backend(name=None):
    """Return the kernel module for *name* (default: the env var / auto)."""
    if name is None:
        name = os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto"
    return _select(name)


_active = get_backend()

BACKEND_NAME = _active.BACKEND_NAME
gru_seq_forward = _active.gru_seq_forward
gru_seq_backward = _active.gru_seq_backward
