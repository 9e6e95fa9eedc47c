# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled layer kernels.

Same contract as numpy_backend: validated C-contiguous float32 inputs,
float64 accumulation, float32 results. All loops run without the GIL so
batch feature extraction can parallelize across images.

The convolution is organized as accumulated rank-1 updates: for each
(filter, input channel, kernel tap) the scalar weight is streamed across
the output plane. The inner loop over output columns has no cross-iteration
dependency, which is what lets the C compiler vectorize the f64 adds.
"""

import numpy as np

cdef extern from "math.h" nogil:
    double c_pow "pow"(double, double)

NAME = "native"


def conv2d(const float[:, :, ::1] x, const float[:, :, :, ::1] w,
           const float[::1] b, int stride, int pad, int groups):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], width = x.shape[2]
    cdef Py_ssize_t o = w.shape[0], cg = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t out_h = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t out_w = (width + 2 * pad - kw) // stride + 1
    cdef Py_ssize_t og = o // groups

    acc_arr = np.empty((out_h, out_w), dtype=np.float64)
    out_arr = np.empty((o, out_h, out_w), dtype=np.float32)
    cdef double[:, ::1] acc = acc_arr
    cdef float[:, :, ::1] out = out_arr

    cdef Py_ssize_t fo, ci, i, j, oh, ow, ih, iw0, ow_lo, ow_hi, c0
    cdef double wv, bias
    with nogil:
        for fo in range(o):
            c0 = (fo // og) * cg
            bias = b[fo]
            for oh in range(out_h):
                for ow in range(out_w):
                    acc[oh, ow] = bias
            for ci in range(cg):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[fo, ci, i, j]
                        # valid output-column range for this tap:
                        # iw = ow*stride + j - pad must land in [0, width)
                        ow_lo = 0
                        if j < pad:
                            ow_lo = (pad - j + stride - 1) // stride
                        ow_hi = out_w
                        if (out_w - 1) * stride + j - pad >= width:
                            ow_hi = (width - 1 - j + pad) // stride + 1
                        if ow_lo >= ow_hi:
                            continue
                        iw0 = ow_lo * stride + j - pad
                        for oh in range(out_h):
                            ih = oh * stride + i - pad
                            if ih < 0 or ih >= h:
                                continue
                            for ow in range(ow_lo, ow_hi):
                                acc[oh, ow] += wv * x[c0 + ci, ih, iw0 + (ow - ow_lo) * stride]
            for oh in range(out_h):
                for ow in range(out_w):
                    out[fo, oh, ow] = <float>acc[oh, ow]
    return out_arr


def lrn(const float[:, :, ::1] x, double k, int n, double alpha, double beta):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], width = x.shape[2]
    cdef int half = n // 2
    out_arr = np.empty((c, h, width), dtype=np.float32)
    cdef float[:, :, ::1] out = out_arr
    cdef Py_ssize_t ci, c0, c1, cc, i, j
    cdef double s, scale = alpha / n
    cdef double v
    with nogil:
        for ci in range(c):
            c0 = ci - half
            if c0 < 0:
                c0 = 0
            c1 = ci + half + 1
            if c1 > c:
                c1 = c
            for i in range(h):
                for j in range(width):
                    s = 0.0
                    for cc in range(c0, c1):
                        v = x[cc, i, j]
                        s += v * v
                    out[ci, i, j] = <float>(x[ci, i, j] / c_pow(k + scale * s, beta))
    return out_arr


def maxpool(const float[:, :, ::1] x, int size, int stride):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], width = x.shape[2]
    cdef Py_ssize_t out_h = (h - size) // stride + 1
    cdef Py_ssize_t out_w = (width - size) // stride + 1
    out_arr = np.empty((c, out_h, out_w), dtype=np.float32)
    cdef float[:, :, ::1] out = out_arr
    cdef Py_ssize_t ci, oh, ow, i, j
    cdef float m, v
    with nogil:
        for ci in range(c):
            for oh in range(out_h):
                for ow in range(out_w):
                    m = x[ci, oh * stride, ow * stride]
                    for i in range(size):
                        for j in range(size):
                            v = x[ci, oh * stride + i, ow * stride + j]
                            if v > m:
                                m = v
                    out[ci, oh, ow] = m
    return out_arr


def matvec(const float[:, ::1] w, const float[::1] x, const float[::1] b):
    cdef Py_ssize_t m = w.shape[0], n = w.shape[1]
    out_arr = np.empty(m, dtype=np.float32)
    cdef float[::1] out = out_arr
    cdef Py_ssize_t i, j, n4 = n - n % 4
    cdef double s0, s1, s2, s3
    with nogil:
        for i in range(m):
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            for j in range(0, n4, 4):
                s0 += <double>w[i, j] * x[j]
                s1 += <double>w[i, j + 1] * x[j + 1]
                s2 += <double>w[i, j + 2] * x[j + 2]
                s3 += <double>w[i, j + 3] * x[j + 3]
            for j in range(n4, n):
                s0 += <double>w[i, j] * x[j]
            out[i] = <float>(s0 + s1 + s2 + s3 + <double>b[i])
    return out_arr
