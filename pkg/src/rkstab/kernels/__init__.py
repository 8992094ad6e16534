"""Backend selection for the hot per-step kernels.

At import time this package picks the compiled Cython backend when it is
available and falls back to the pure-numpy reference implementation otherwise.
Set the environment variable ``RKSTAB_PURE_PYTHON=1`` before import to force
the reference backend (useful for benchmarking and debugging).

``benchmarks/compare_backends.py`` times the two implementations against each
other; ``tests/test_kernels.py`` checks they agree numerically.
"""

import os

from . import _reference

_impl = _reference
if os.environ.get("RKSTAB_PURE_PYTHON") != "1":
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _reference

#: Name of the backend selected at import: "cython" or "reference".
BACKEND = _impl.BACKEND_NAME

advection_rhs = _impl.advection_rhs


def available_backends():
    """Map of importable backend name -> module (reference always present)."""
    backends = {"reference": _reference}
    try:
        from . import _speedups

        backends["cython"] = _speedups
    except ImportError:
        pass
    return backends


__all__ = ["BACKEND", "advection_rhs", "available_backends"]
