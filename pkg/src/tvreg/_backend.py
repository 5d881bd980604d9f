"""Kernel backend selection.

The compiled extension ``tvreg._kernels_c`` is preferred when it imported
cleanly; otherwise the NumPy fallback is used.  Set ``TVREG_BACKEND`` to
``python`` or ``compiled`` to force a choice (``compiled`` raises if the
extension is unavailable), or leave it at ``auto``.
"""

from __future__ import annotations

import os

from tvreg import _kernels_np

try:
    from tvreg import _kernels_c
except ImportError:
    _kernels_c = None

_choice = os.environ.get("TVREG_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"TVREG_BACKEND must be auto, python, or compiled; got {_choice!r}")
if _choice == "compiled" and _kernels_c is None:
    raise ImportError("TVREG_BACKEND=compiled but the compiled extension is not installed")

if _choice == "python" or _kernels_c is None:
    kernels = _kernels_np
else:
    kernels = _kernels_c

HAVE_COMPILED = _kernels_c is not None


def backend_name() -> str:
    return kernels.BACKEND


def get_backend(name: str = "auto"):
    """Return a kernel module by name; used by tests and benchmarks."""
    if name == "python":
        return _kernels_np
    if name == "compiled":
        if _kernels_c is None:
            raise ImportError("compiled kernel extension is not installed")
        return _kernels_c
    return kernels
