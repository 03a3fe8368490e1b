"""Kernel lane selection: compiled extension with pure numpy fallback.

The compiled module is preferred when importable. ``CELLSEG_PURE=1`` forces
the fallback; :func:`set_backend` switches lanes at runtime (used by the
benchmark and by tests that exercise both lanes).
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built; fall back silently
    _compiled = None

_active = _pykernels if (_compiled is None or os.environ.get("CELLSEG_PURE") == "1") else _compiled


def compiled_available() -> bool:
    return _compiled is not None


def active():
    """Return the module providing the hot kernels."""
    return _active


def backend_name() -> str:
    return "compiled" if _active is _compiled else "pure"


def set_backend(name: str) -> None:
    """Select 'compiled', 'pure', or 'auto'."""
    global _active
    if name == "pure":
        _active = _pykernels
    elif name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        _active = _compiled
    elif name == "auto":
        _active = _compiled if _compiled is not None else _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
