"""Backend selection for the hot loops.

The compiled extension ``walksieve._kernels`` is used when it imports;
otherwise, or when ``WALKSIEVE_BACKEND=python`` is set, the numpy fallback
in ``walksieve._pykernels`` is used. Both produce identical outputs.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("cython", "python")


def available() -> tuple[str, ...]:
    return BACKENDS if _compiled is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get("WALKSIEVE_BACKEND", "").strip().lower()
    if forced in BACKENDS:
        return forced if forced in available() else "python"
    return "cython" if _compiled is not None else "python"


def get(name: str | None = None) -> ModuleType:
    name = name or default_backend()
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown backend {name!r}")


BACKEND = default_backend()
