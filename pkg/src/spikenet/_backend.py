"""Kernel backend selection.

The compiled kernel is used when it was built; set ``SPIKENET_BACKEND=python``
to force the pure-Python fallback.
"""
import os

from . import _pykernels

_forced = os.environ.get("SPIKENET_BACKEND", "").strip().lower()

if _forced == "python":
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        kernels = _pykernels
        BACKEND = "python"

EXTINCT = _pykernels.EXTINCT
CENSORED = _pykernels.CENSORED
