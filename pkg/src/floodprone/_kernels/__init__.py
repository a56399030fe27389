"""Hot inner loops: split scanning and TreeSHAP.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy / pure-Python ``_pykernels`` module takes over. Set
``FLOODPRONE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("FLOODPRONE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"
best_split = _impl.best_split
tree_shap_rows = _impl.tree_shap_rows

__all__ = ["BACKEND", "best_split", "tree_shap_rows"]
