"""Back-end selection for the hot kernels.

The compiled module is used when it imports; otherwise the pure-Python
twin takes over. Set ``MBTREES_BACKEND=python`` to force the fallback.
"""

import os

from . import _pycore

BACKEND = "python"
core = _pycore

if os.environ.get("MBTREES_BACKEND", "").lower() != "python":
    try:
        from . import _core as core  # noqa: F811

        BACKEND = "compiled"
    except ImportError:
        core = _pycore


def backend(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None for default)."""
    if name is None:
        return core
    if name == "python":
        return _pycore
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
