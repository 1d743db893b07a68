"""Kernel backend selection.

The compiled ``_ckernels`` extension is preferred; the numpy/pure-Python
module is used when the extension is not built or when the environment
variable ``COLDEC_PURE_PYTHON`` is set to a non-empty value.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("COLDEC_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

cif_fire = _impl.cif_fire
edit_distance = _impl.edit_distance
topk_desc = _impl.topk_desc


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
