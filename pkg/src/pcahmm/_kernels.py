"""Select the kernel backend (HMM recursions, Lloyd steps) at import time.

The compiled Cython module is used when it was built; otherwise the numpy
implementation takes over. Setting ``PCAHMM_PURE_PYTHON=1`` forces the
fallback, which is how the benchmark and the backend-parity tests reach both.
"""
import os

from . import _pykernels

if os.environ.get("PCAHMM_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

forward = _impl.forward
backward = _impl.backward
xi_sum = _impl.xi_sum
viterbi = _impl.viterbi
kmeans_assign = _impl.kmeans_assign
kmeans_sums = _impl.kmeans_sums


def backends():
    """Return every importable backend keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
