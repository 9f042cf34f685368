"""Kernel backend chosen at import: compiled if available, else pure Python.

Set ``STATESEL_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("STATESEL_PURE_PYTHON"):
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl

        BACKEND = "python"

csr_predict = _impl.csr_predict
sgd_epoch = _impl.sgd_epoch

__all__ = ["BACKEND", "csr_predict", "sgd_epoch"]
