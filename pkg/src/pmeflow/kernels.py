"""Kernel backend selection: compiled extension if built, numpy otherwise.

``BACKEND`` reports which one is active; ``available_backends()`` returns
both when the extension compiled, which the benchmark and the agreement
tests use to compare them on identical inputs.  Setting ``PMEFLOW_PURE=1``
in the environment forces the numpy backend even when the extension built.
"""

from __future__ import annotations

import os

from . import _kernels_py

_impl = None
if not os.environ.get("PMEFLOW_PURE"):
    try:  # pragma: no cover - depends on the build environment
        from . import _kernels as _impl
    except ImportError:  # pragma: no cover
        _impl = None
if _impl is not None:
    BACKEND = "cython"
else:
    _impl = _kernels_py
    BACKEND = "python"

bb_cost_grad_power = _impl.bb_cost_grad_power
bb_cost_grad_generic = _impl.bb_cost_grad_generic
bform_triple = _impl.bform_triple


def available_backends():
    backends = {"python": _kernels_py}
    if BACKEND == "cython":
        backends["cython"] = _impl
    return backends
