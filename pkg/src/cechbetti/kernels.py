"""Backend selection for the hot kernels.

The compiled Cython extension is preferred; the pure NumPy/Python module is
a drop-in replacement.  Set CECHBETTI_PURE=1 to force the pure backend
(used by the kernel-parity tests and the benchmark).
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("CECHBETTI_PURE"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

BACKEND: str = _impl.BACKEND_NAME

meb_ball = _impl.meb_ball
meb_radius = _impl.meb_radius
meb_radius_batch = _impl.meb_radius_batch
gf2_reduce = _impl.gf2_reduce
