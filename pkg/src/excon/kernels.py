"""Backend selection for the hot loops.

The compiled extension is used when it was built; ``EXCON_PURE_PYTHON=1``
forces the NumPy fallback. ``BACKEND`` names the active choice.
"""

import os

from . import _pykernels

if os.environ.get("EXCON_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

max_cross_distance = _impl.max_cross_distance
fluct_fvals = _impl.fluct_fvals
outlier_stats = _impl.outlier_stats
rocket_apply = _impl.rocket_apply
