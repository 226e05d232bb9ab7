"""Backend selector for the exact-diagonalization kernels.

Prefers the compiled extension; falls back to the pure numpy implementation
when the extension is missing or FERMITRACE_PURE_PYTHON is set.  Both expose
the same functions with identical basis order and sign conventions.
"""
from __future__ import annotations

import os

from . import _ed_py

if os.environ.get("FERMITRACE_PURE_PYTHON"):
    _impl = _ed_py
    BACKEND = "python"
else:
    try:
        from . import _ed_cy as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = _ed_py
        BACKEND = "python"

build_hamiltonian_parts = _impl.build_hamiltonian_parts
one_pdm = _impl.one_pdm


def backend_name() -> str:
    return BACKEND
