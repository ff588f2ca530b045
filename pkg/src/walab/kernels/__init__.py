"""Hot data-movement kernels with a compiled core and a numpy fallback.

The compiled extension (Cython) is preferred when built; the pure-numpy
implementation is selected otherwise. Both produce bit-identical results,
so which one runs is a pure speed question. Selection can be forced with
the environment variable WALAB_KERNELS=numpy|cython or via
:func:`set_backend`; ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _npkernels

try:
    from . import _cykernels
except ImportError:
    _cykernels = None

_BACKENDS = {"numpy": _npkernels}
if _cykernels is not None:
    _BACKENDS["cython"] = _cykernels

_active = None


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name: str):
    """Force a kernel backend ("numpy" or "cython"). Raises on unknown/unbuilt."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} not available (have {available_backends()})")
    _active = _BACKENDS[name]


def backend_name() -> str:
    return "cython" if _active is _cykernels else "numpy"


_requested = os.environ.get("WALAB_KERNELS", "auto")
if _requested == "auto":
    set_backend("cython" if _cykernels is not None else "numpy")
else:
    set_backend(_requested)


def im2col(xp, k):
    return _active.im2col(xp, k)


def col2im_add(cols, k, B, Hp, Wp, C):
    return _active.col2im_add(cols, k, B, Hp, Wp, C)


def maxpool_forward(x, k):
    return _active.maxpool_forward(x, k)


def maxpool_backward(grad_out, idx, k, H, W):
    return _active.maxpool_backward(grad_out, idx, k, H, W)
