"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available.  Set ALARM_TAXIS_BACKEND=python or =compiled to force a
choice (forcing "compiled" raises if the extension is missing).
"""

from __future__ import annotations

import os

_choice = os.environ.get("ALARM_TAXIS_BACKEND", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise RuntimeError(f"ALARM_TAXIS_BACKEND must be auto, compiled or python, got {_choice!r}")

if _choice == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "compiled":
            raise RuntimeError(
                "ALARM_TAXIS_BACKEND=compiled but alarmtaxis._kernels is not built; "
                "reinstall with a working C toolchain or use the python backend"
            )
        from . import _kernels_py as _impl

NAME: str = _impl.NAME

laplacian = _impl.laplacian
upwind_divergence = _impl.upwind_divergence
face_absgrad_max = _impl.face_absgrad_max
euler_stage = _impl.euler_stage
monitor_sums = _impl.monitor_sums


def get_backend(name: str):
    """Return the raw kernel module for an explicit backend name (benchmarks)."""
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    if name == "compiled":
        from . import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
