"""Kernel backend selection.

The alternating-update loop exists twice: a compiled Cython extension
(_alternate_c) and a pure-numpy reference (_alternate_py). The compiled one
is preferred when importable; set IMAXCAL_PURE_PYTHON=1 to force the
reference implementation. Both expose alternate() and edges_from_phis()
with identical contracts.
"""

import os

from . import _alternate_py

if os.environ.get("IMAXCAL_PURE_PYTHON"):
    _impl = _alternate_py
    BACKEND = "python"
else:
    try:
        from . import _alternate_c as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _alternate_py
        BACKEND = "python"

alternate = _impl.alternate
edges_from_phis = _impl.edges_from_phis


def get_backend(name):
    """Return (alternate, edges_from_phis) for an explicit backend name."""
    if name == "python":
        return _alternate_py.alternate, _alternate_py.edges_from_phis
    if name == "compiled":
        from . import _alternate_c

        return _alternate_c.alternate, _alternate_c.edges_from_phis
    raise ValueError(f"unknown kernel backend {name!r}")
