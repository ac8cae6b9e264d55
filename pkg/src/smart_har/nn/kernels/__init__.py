"""Convolution kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the
pure-numpy fallback is always available. ``SMART_KERNELS=numpy`` or
``SMART_KERNELS=cython`` in the environment forces a backend (the latter
raises if the extension is missing). Both backends implement the same six
functions with identical semantics; see fallback.py for the contract.
"""

import os

import numpy as np

from . import fallback

try:
    from . import _convkernels
except ImportError:
    _convkernels = None

_forced = os.environ.get("SMART_KERNELS", "").strip().lower()
if _forced == "numpy":
    _impl = fallback
elif _forced == "cython":
    if _convkernels is None:
        raise ImportError("SMART_KERNELS=cython but the compiled extension "
                          "is not available")
    _impl = _convkernels
else:
    _impl = _convkernels if _convkernels is not None else fallback

BACKEND = "cython" if _impl is _convkernels and _convkernels is not None else "numpy"
HAVE_CYTHON = _convkernels is not None


def get_backend(name=None):
    """Return the kernel module for `name` (None = the selected default)."""
    if name is None:
        return _impl
    if name == "numpy":
        return fallback
    if name == "cython":
        if _convkernels is None:
            raise ImportError("compiled kernel extension not built")
        return _convkernels
    raise ValueError(f"unknown kernel backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, w, stride=1):
    return _impl.conv2d_forward(_c(x), _c(w), stride)


def conv2d_backward_weight(x, dout, kh, kw, stride=1):
    return _impl.conv2d_backward_weight(_c(x), _c(dout), kh, kw, stride)


def conv2d_backward_input(dout, w, in_h, in_w, stride=1):
    return _impl.conv2d_backward_input(_c(dout), _c(w), in_h, in_w, stride)


def conv1d_forward(x, w, stride=1):
    return _impl.conv1d_forward(_c(x), _c(w), stride)


def conv1d_backward_weight(x, dout, k, stride=1):
    return _impl.conv1d_backward_weight(_c(x), _c(dout), k, stride)


def conv1d_backward_input(dout, w, in_len, stride=1):
    return _impl.conv1d_backward_input(_c(dout), _c(w), in_len, stride)
