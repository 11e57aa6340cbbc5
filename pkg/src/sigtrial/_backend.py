"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-numpy fallback
implements the identical algorithm.  Set SIGTRIAL_BACKEND=python to force the
fallback (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

from . import _bivfit_py

_FORCED = os.environ.get("SIGTRIAL_BACKEND", "").lower()

if _FORCED in ("python", "pure", "numpy"):
    _impl = _bivfit_py
    BACKEND = "python"
else:
    try:
        from . import _bivfit_c as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _bivfit_py
        BACKEND = "python"


def backend_name() -> str:
    return BACKEND


def bfgs_fit(x, t, y1, y2, init, max_iter, gtol):
    return _impl.bfgs_fit(x, t, y1, y2, init, max_iter, gtol)


def bfgs_fit_many(X, t, y1, y2, init, max_iter, gtol):
    return _impl.bfgs_fit_many(X, t, y1, y2, init, max_iter, gtol)
