"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

Set ``SUHMO_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels

    HAVE_EXTENSION = True
except ImportError:
    _ckernels = None
    HAVE_EXTENSION = False

if HAVE_EXTENSION and not os.environ.get("SUHMO_PURE_PYTHON"):
    BACKEND, _impl = "cython", _ckernels
else:
    BACKEND, _impl = "python", _pykernels


def use_backend(name):
    """Switch backend at runtime ("cython" or "python"); returns the previous one."""
    global _impl, BACKEND
    prev = BACKEND
    if name == "cython":
        if not HAVE_EXTENSION:
            raise ImportError("the compiled kernel extension is not built")
        _impl = _ckernels
    elif name == "python":
        _impl = _pykernels
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    BACKEND = name
    return prev


def lstm_seq_forward(xz, wh, h0, c0):
    dt = xz.dtype
    return _impl.lstm_seq_forward(
        np.ascontiguousarray(xz),
        np.ascontiguousarray(wh, dtype=dt),
        np.ascontiguousarray(h0, dtype=dt),
        np.ascontiguousarray(c0, dtype=dt),
    )


def lstm_seq_backward(dhs, dc_last, wh, acts, cs, tcs, c0):
    dt = dhs.dtype
    c = np.ascontiguousarray
    return _impl.lstm_seq_backward(
        c(dhs), c(dc_last, dtype=dt), c(wh, dtype=dt), c(acts), c(cs), c(tcs), c(c0, dtype=dt)
    )


def rasterize(frames, height, width, radius):
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        return _impl.rasterize(frames[None], height, width, float(radius))[0]
    return _impl.rasterize(frames, height, width, float(radius))
