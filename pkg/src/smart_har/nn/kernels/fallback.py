"""Pure-numpy convolution kernels (valid padding, configurable stride).

Forward passes use strided window views + einsum; the input-gradient pass
scatters through k*k strided slice adds, which avoids an explicit col2im.
Shapes follow the torch convention: x (B, Cin, H, W), w (Cout, Cin, kh, kw).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x, w, stride):
    win = sliding_window_view(x, w.shape[2:], axis=(2, 3))[:, :, ::stride, ::stride]
    return np.einsum("bihwkl,oikl->bohw", win, w, optimize=True)


def conv2d_backward_weight(x, dout, kh, kw, stride):
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    return np.einsum("bihwkl,bohw->oikl", win, dout, optimize=True)


def conv2d_backward_input(dout, w, in_h, in_w, stride):
    b = dout.shape[0]
    cin, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    ho, wo = dout.shape[2], dout.shape[3]
    dx = np.zeros((b, cin, in_h, in_w), dtype=dout.dtype)
    for ki in range(kh):
        for kj in range(kw):
            patch = np.einsum("bohw,oi->bihw", dout, w[:, :, ki, kj], optimize=True)
            dx[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += patch
    return dx


def conv1d_forward(x, w, stride):
    win = sliding_window_view(x, w.shape[2], axis=2)[:, :, ::stride]
    return np.einsum("bilk,oik->bol", win, w, optimize=True)


def conv1d_backward_weight(x, dout, k, stride):
    win = sliding_window_view(x, k, axis=2)[:, :, ::stride]
    return np.einsum("bilk,bol->oik", win, dout, optimize=True)


def conv1d_backward_input(dout, w, in_len, stride):
    b = dout.shape[0]
    cin, k = w.shape[1], w.shape[2]
    lo = dout.shape[2]
    dx = np.zeros((b, cin, in_len), dtype=dout.dtype)
    for ki in range(k):
        patch = np.einsum("bol,oi->bil", dout, w[:, :, ki], optimize=True)
        dx[:, :, ki:ki + stride * lo:stride] += patch
    return dx
