"""Kernel backend selection.

``SKA_RECALL_BACKEND=numpy`` forces the pure-numpy kernels; otherwise the
numba kernels are used whenever numba imports cleanly.
"""

import os

from . import _numpy_kernels

try:
    from . import _numba_kernels
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_kernels = None
    NUMBA_AVAILABLE = False

ENV_FLAG = "SKA_RECALL_BACKEND"


def _choose():
    want = os.environ.get(ENV_FLAG, "").strip().lower()
    if want == "numpy" or not NUMBA_AVAILABLE:
        return "numpy", _numpy_kernels
    return "numba", _numba_kernels


BACKEND, kernels = _choose()


def implementations():
    """All importable kernel modules keyed by backend name."""
    out = {"numpy": _numpy_kernels}
    if NUMBA_AVAILABLE:
        out["numba"] = _numba_kernels
    return out
