# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled 1-D convolution kernels (hot path of network training).

Same contracts as vins.net._conv_py; accumulation order is fixed, so results
are deterministic run to run.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv1d_forward(double[:, :, ::1] x, double[:, :, ::1] w, double[::1] bias, int stride=1):
    cdef Py_ssize_t B = x.shape[0], cin = x.shape[1], lin = x.shape[2]
    cdef Py_ssize_t cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t lout = (lin - k) // stride + 1
    y_arr = np.empty((B, cout, lout), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t b, oc, j, ic, kk, base
    cdef double acc
    for b in range(B):
        for oc in range(cout):
            for j in range(lout):
                base = j * stride
                acc = bias[oc]
                for ic in range(cin):
                    for kk in range(k):
                        acc += x[b, ic, base + kk] * w[oc, ic, kk]
                y[b, oc, j] = acc
    return y_arr


def conv1d_backward(double[:, :, ::1] x, double[:, :, ::1] w, double[:, :, ::1] dy, int stride=1):
    cdef Py_ssize_t B = x.shape[0], cin = x.shape[1], lin = x.shape[2]
    cdef Py_ssize_t cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t lout = dy.shape[2]
    dx_arr = np.zeros((B, cin, lin), dtype=np.float64)
    dw_arr = np.zeros((cout, cin, k), dtype=np.float64)
    db_arr = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t b, oc, j, ic, kk, base
    cdef double g
    for b in range(B):
        for oc in range(cout):
            for j in range(lout):
                g = dy[b, oc, j]
                db[oc] += g
                base = j * stride
                for ic in range(cin):
                    for kk in range(k):
                        dw[oc, ic, kk] += g * x[b, ic, base + kk]
                        dx[b, ic, base + kk] += g * w[oc, ic, kk]
    return dx_arr, dw_arr, db_arr
