"""Backend selection for the hot loops.

The compiled Cython module is used when it is importable; otherwise (or when
``MERITIRL_PURE_PYTHON`` is set to a non-empty value other than ``0``) the
numpy fallback is used. ``BACKEND`` names the active implementation.
"""
import os

from . import _fallback

_force_pure = os.environ.get("MERITIRL_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_pure:
        raise ImportError("pure-python backend requested")
    from . import _kernels as _impl
    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

sample_rollouts = _impl.sample_rollouts
discounted_counts = _impl.discounted_counts
soft_value_iteration = _impl.soft_value_iteration


def get_backend(name):
    """Return the kernel module for ``name`` ("compiled" or "python")."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
