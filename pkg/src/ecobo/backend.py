"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set ``ECOBO_PURE_PYTHON=1`` to force the numpy backend (used by the
benchmark and by tests that compare the two implementations).
"""

from __future__ import annotations

import os

if os.environ.get("ECOBO_PURE_PYTHON"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND_NAME
cross_covariance = _impl.cross_covariance
grad_traces = _impl.grad_traces
