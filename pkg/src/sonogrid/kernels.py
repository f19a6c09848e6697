"""Selects the compiled kernels when available, pure fallbacks otherwise.

Set ``SONOGRID_PURE=1`` to force the pure implementations (used by the
benchmark and by tests that exercise both lanes).
"""

from __future__ import annotations

import os

from . import _kernels_py

_force_pure = os.environ.get("SONOGRID_PURE", "") not in ("", "0")

if _force_pure:
    _impl = _kernels_py
    USING_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        USING_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        USING_COMPILED = False

fht_radix2 = _impl.fht_radix2
idw_fill = _impl.idw_fill

EARTH_RADIUS_M = _kernels_py.EARTH_RADIUS_M
