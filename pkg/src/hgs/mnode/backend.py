"""Select the rollout kernel at import time.

The compiled extension is used when it imports; otherwise, or when
``HGS_PURE_PYTHON=1`` is set, the numpy implementation is used.
"""
from __future__ import annotations

import os

from . import _rollout_py

kernel = _rollout_py
name = "python"

if os.environ.get("HGS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _rollout_ext
    except ImportError:  # extension not built
        pass
    else:
        kernel = _rollout_ext
        name = "compiled"


def get(backend: str | None = None):
    """Kernel module by name ("compiled", "python"), or the import-time default."""
    if backend is None:
        return kernel
    if backend == "python":
        return _rollout_py
    if backend == "compiled":
        from . import _rollout_ext
        return _rollout_ext
    raise ValueError(f"unknown backend {backend!r}; expected compiled or python")
