"""Backend switch for the numeric kernels.

By default every kernel in :mod:`htim.kernels` is compiled with numba.
Setting the environment variable ``HTIM_NUMBA`` to ``0`` (or ``false`` /
``off`` / ``no``) before import turns the decorator into a no-op, leaving the
plain interpreted functions.  Both paths run the same statements in the same
order, so results are bitwise identical; only speed differs.  The flag is read
once at import time because numba compilation happens at import/first call.
"""

from __future__ import annotations

import os

_flag = os.environ.get("HTIM_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "off", "no")

if NUMBA_ENABLED:
    try:
        from numba import njit as _numba_njit
    except ImportError:  # pragma: no cover - numba is an install requirement
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        if args and callable(args[0]):
            return _numba_njit(**kwargs)(args[0])
        return _numba_njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):  # noqa: ARG001 - mirror the numba signature
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
