"""Kernel backend selection.

The compiled Cython kernel is used when available; otherwise the numpy
fallback. Set ``FAIRLOG_PURE_PYTHON=1`` to force the fallback (useful for
the lane-equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _tape_py

if os.environ.get("FAIRLOG_PURE_PYTHON") == "1":
    _impl = _tape_py
    BACKEND = "python"
else:
    try:
        from . import _tape_c as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _tape_py
        BACKEND = "python"

tape_forward = _impl.tape_forward
tape_forward_backward = _impl.tape_forward_backward


def backend_name() -> str:
    return BACKEND
