"""Vectorized numpy implementations of the hot layer kernels.

This is the fallback path used when the compiled extension is not built.
It mirrors the native module's contract exactly: inputs are validated,
C-contiguous float32 arrays (the ops layer guarantees this), accumulation
happens in float64, results are float32.
"""

import numpy as np

NAME = "numpy"

# Column-chunk size for the fully-connected kernel; bounds the size of the
# temporary float64 weight slice (4096 rows x 1024 cols x 8 B = 32 MB).
_FC_CHUNK = 1024


def conv2d(x, w, b, stride, pad, groups):
    """Grouped 2-D convolution via im2col + matmul, zero padding."""
    c, h, width = x.shape
    o, cg, kh, kw = w.shape
    out_h = (h + 2 * pad - kh) // stride + 1
    out_w = (width + 2 * pad - kw) // stride + 1
    og = o // groups

    if pad > 0:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride][:, :out_h, :out_w]  # C,Ho,Wo,Kh,Kw

    out = np.empty((o, out_h, out_w), dtype=np.float32)
    for g in range(groups):
        cols = windows[g * cg:(g + 1) * cg]
        cols = cols.transpose(0, 3, 4, 1, 2).reshape(cg * kh * kw, out_h * out_w)
        wg = w[g * og:(g + 1) * og].reshape(og, cg * kh * kw)
        acc = wg.astype(np.float64) @ cols.astype(np.float64)
        acc += b[g * og:(g + 1) * og, None].astype(np.float64)
        out[g * og:(g + 1) * og] = acc.reshape(og, out_h, out_w).astype(np.float32)
    return out


def lrn(x, k, n, alpha, beta):
    """Cross-channel response normalization with boundary-clipped windows."""
    c = x.shape[0]
    half = n // 2
    sq = np.square(x, dtype=np.float64)
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(sq, axis=0)])
    hi = np.minimum(np.arange(c) + half + 1, c)
    lo = np.maximum(np.arange(c) - half, 0)
    wsum = csum[hi] - csum[lo]
    out = x / np.power(k + (alpha / n) * wsum, beta)
    return out.astype(np.float32)


def maxpool(x, size, stride):
    """Per-channel max over size x size windows; exact, no arithmetic."""
    out_h = (x.shape[1] - size) // stride + 1
    out_w = (x.shape[2] - size) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (size, size), axis=(1, 2))
    windows = windows[:, ::stride, ::stride][:, :out_h, :out_w]
    return np.ascontiguousarray(windows.max(axis=(3, 4)))


def matvec(w, x, b):
    """w @ x + b with float64 accumulation, chunked to bound temporaries."""
    m, n = w.shape
    acc = b.astype(np.float64)
    x64 = x.astype(np.float64)
    for j in range(0, n, _FC_CHUNK):
        acc = acc + w[:, j:j + _FC_CHUNK].astype(np.float64) @ x64[j:j + _FC_CHUNK]
    return acc.astype(np.float32)
