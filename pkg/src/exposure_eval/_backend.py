"""Kernel backend selection.

The compiled extension is used when it was built; set
``EXPOSURE_EVAL_BACKEND=python`` to force the numpy fallback.
"""

import os

from . import _kernels_py


def load(name=None):
    name = name or os.environ.get("EXPOSURE_EVAL_BACKEND", "auto")
    if name == "python":
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        if name == "cython":
            raise
        return _kernels_py
    return _kernels


def available():
    """Names of the backends importable in this environment."""
    try:
        load("cython")
    except ImportError:
        return ["python"]
    return ["python", "cython"]


kernels = load()
BACKEND = kernels.BACKEND
