"""Select the compiled kernels when importable, else the numpy fallback.

Set ``MUHF_PURE=1`` in the environment to force the fallback.
"""
import os

if os.environ.get("MUHF_PURE", "") not in ("", "0"):
    from . import _pure as kernels
    BACKEND = "python"
else:
    try:
        from . import _core as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _pure as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
