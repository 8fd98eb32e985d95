"""Pick the compiled kernels when available, otherwise the numpy/pure-Python ones.

Set ``STEGOSPP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pycore as pycore

core = pycore
BACKEND = "python"

if os.environ.get("STEGOSPP_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _core as core  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def get_core(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "python") or the default."""
    if name is None:
        return core
    if name == "python":
        return pycore
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
