"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``SCATTER_CRYPT_PURE_PYTHON=1`` to force the numpy kernels.
"""
import os

from . import _pykernels

if os.environ.get("SCATTER_CRYPT_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = _pykernels

BACKEND = "cython" if kernels is not _pykernels else "python"


def num_threads() -> int:
    """Parallelism cap from ``SCATTER_CRYPT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SCATTER_CRYPT_THREADS", "1")))
    except ValueError:
        return 1
