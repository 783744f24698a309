"""Kernel backend selection.

The hot recursions (biquad cascade, squared-signal exponential detector) have
a compiled Cython implementation and a scipy-backed reference implementation
with identical contracts. The compiled one is preferred when importable; set
``ACSLM_KERNELS=reference`` or ``ACSLM_KERNELS=compiled`` to force a backend.
"""

import os

from . import _reference

_requested = os.environ.get("ACSLM_KERNELS", "").strip().lower()

if _requested == "reference":
    _impl = _reference
    BACKEND = "reference"
else:
    try:
        from . import _hot as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _reference
        BACKEND = "reference"

biquad_cascade = _impl.biquad_cascade
power_detect = _impl.power_detect

__all__ = ["BACKEND", "biquad_cascade", "power_detect"]
