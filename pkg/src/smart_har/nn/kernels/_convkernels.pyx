# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels; semantics identical to fallback.py."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w, int stride):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h - kh) // stride + 1
    cdef Py_ssize_t wo = (wd - kw) // stride + 1
    out_arr = np.zeros((b, cout, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t n, o, i, y, xx, ki, kj
    cdef double acc
    for n in range(b):
        for o in range(cout):
            for y in range(ho):
                for xx in range(wo):
                    acc = 0.0
                    for i in range(cin):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += x[n, i, y * stride + ki, xx * stride + kj] * w[o, i, ki, kj]
                    out[n, o, y, xx] = acc
    return out_arr


def conv2d_backward_weight(double[:, :, :, ::1] x, double[:, :, :, ::1] dout,
                           int kh, int kw, int stride):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1]
    cdef Py_ssize_t cout = dout.shape[1], ho = dout.shape[2], wo = dout.shape[3]
    dw_arr = np.zeros((cout, cin, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef Py_ssize_t n, o, i, y, xx, ki, kj
    cdef double g
    for n in range(b):
        for o in range(cout):
            for y in range(ho):
                for xx in range(wo):
                    g = dout[n, o, y, xx]
                    for i in range(cin):
                        for ki in range(kh):
                            for kj in range(kw):
                                dw[o, i, ki, kj] += x[n, i, y * stride + ki, xx * stride + kj] * g
    return dw_arr


def conv2d_backward_input(double[:, :, :, ::1] dout, double[:, :, :, ::1] w,
                          int in_h, int in_w, int stride):
    cdef Py_ssize_t b = dout.shape[0], cout = dout.shape[1]
    cdef Py_ssize_t ho = dout.shape[2], wo = dout.shape[3]
    cdef Py_ssize_t cin = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    dx_arr = np.zeros((b, cin, in_h, in_w), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t n, o, i, y, xx, ki, kj
    cdef double g
    for n in range(b):
        for o in range(cout):
            for y in range(ho):
                for xx in range(wo):
                    g = dout[n, o, y, xx]
                    for i in range(cin):
                        for ki in range(kh):
                            for kj in range(kw):
                                dx[n, i, y * stride + ki, xx * stride + kj] += w[o, i, ki, kj] * g
    return dx_arr


def conv1d_forward(double[:, :, ::1] x, double[:, :, ::1] w, int stride):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t lo = (length - k) // stride + 1
    out_arr = np.zeros((b, cout, lo), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t n, o, i, t, ki
    cdef double acc
    for n in range(b):
        for o in range(cout):
            for t in range(lo):
                acc = 0.0
                for i in range(cin):
                    for ki in range(k):
                        acc += x[n, i, t * stride + ki] * w[o, i, ki]
                out[n, o, t] = acc
    return out_arr


def conv1d_backward_weight(double[:, :, ::1] x, double[:, :, ::1] dout,
                           int k, int stride):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1]
    cdef Py_ssize_t cout = dout.shape[1], lo = dout.shape[2]
    dw_arr = np.zeros((cout, cin, k), dtype=np.float64)
    cdef double[:, :, ::1] dw = dw_arr
    cdef Py_ssize_t n, o, i, t, ki
    cdef double g
    for n in range(b):
        for o in range(cout):
            for t in range(lo):
                g = dout[n, o, t]
                for i in range(cin):
                    for ki in range(k):
                        dw[o, i, ki] += x[n, i, t * stride + ki] * g
    return dw_arr


def conv1d_backward_input(double[:, :, ::1] dout, double[:, :, ::1] w,
                          int in_len, int stride):
    cdef Py_ssize_t b = dout.shape[0], cout = dout.shape[1], lo = dout.shape[2]
    cdef Py_ssize_t cin = w.shape[1], k = w.shape[2]
    dx_arr = np.zeros((b, cin, in_len), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t n, o, i, t, ki
    cdef double g
    for n in range(b):
        for o in range(cout):
            for t in range(lo):
                g = dout[n, o, t]
                for i in range(cin):
                    for ki in range(k):
                        dx[n, i, t * stride + ki] += w[o, i, ki] * g
    return dx_arr
