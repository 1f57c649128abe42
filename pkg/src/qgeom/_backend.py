"""Kernel backend selection.

The compiled extension is used when it imports; ``QGEOM_PURE_PYTHON=1``
forces the numpy fallback. ``QGEOM_THREADS`` caps the thread count of the
compiled kernels (ignored by the fallback).
"""

import os

from . import _fallback

if os.environ.get("QGEOM_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _fallback

BACKEND = kernels.NAME


def num_threads():
    raw = os.environ.get("QGEOM_THREADS", "")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"QGEOM_THREADS must be a positive integer, got {raw!r}") from None
    return os.cpu_count() or 1
