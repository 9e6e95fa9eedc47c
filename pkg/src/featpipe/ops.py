"""Layer operations on dense float32 tensors.

Tensors are plain C-contiguous numpy float32 arrays in channel-major layout:
images and activations are shaped (channels, height, width), vectors are
rank 1. Every operation is a pure function; heavy loops are dispatched to
the selected kernel backend (compiled extension or numpy fallback), which
accumulates in float64 and stores float32.
"""

import numpy as np

from . import kernels
from .errors import ShapeError


def as_tensor(x, rank=None):
    """Coerce to a C-contiguous float32 array, optionally checking rank."""
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if rank is not None and arr.ndim != rank:
        raise ShapeError(
            f"expected rank-{rank} tensor", dimension="rank",
            expected=rank, found=arr.ndim,
        )
    if arr.size == 0:
        raise ShapeError("tensor extents must all be >= 1", dimension="extent")
    return arr


def conv_output_size(extent, kernel, stride, pad):
    """Output extent of a conv/pool sliding window along one axis."""
    return (extent + 2 * pad - kernel) // stride + 1


def conv2d(x, weights, bias, *, stride=1, pad=0, groups=1):
    """Grouped 2-D convolution with zero padding.

    x: (C, H, W); weights: (O, C/groups, Kh, Kw); bias: (O,).
    Output channel o in group q reads only the input channels of group q.
    Output is (O, H', W') with H' = floor((H + 2*pad - Kh)/stride) + 1.
    """
    x = as_tensor(x, rank=3)
    weights = as_tensor(weights, rank=4)
    bias = as_tensor(bias, rank=1)
    if stride < 1:
        raise ShapeError("stride must be >= 1", dimension="stride", found=stride)
    if pad < 0:
        raise ShapeError("pad must be >= 0", dimension="pad", found=pad)
    if groups < 1:
        raise ShapeError("groups must be >= 1", dimension="groups", found=groups)

    c, h, w = x.shape
    o, cg, kh, kw = weights.shape
    if c % groups != 0:
        raise ShapeError(
            "input channels not divisible by groups",
            dimension="input channels", expected=f"multiple of {groups}", found=c,
        )
    if o % groups != 0:
        raise ShapeError(
            "output channels not divisible by groups",
            dimension="output channels", expected=f"multiple of {groups}", found=o,
        )
    if cg != c // groups:
        raise ShapeError(
            "weight channel extent does not match input channels / groups",
            dimension="weight channels", expected=c // groups, found=cg,
        )
    if bias.shape[0] != o:
        raise ShapeError(
            "bias length does not match output channels",
            dimension="bias", expected=o, found=bias.shape[0],
        )
    if h + 2 * pad < kh:
        raise ShapeError(
            "kernel taller than padded input",
            dimension="height", expected=f">= {kh}", found=h + 2 * pad,
        )
    if w + 2 * pad < kw:
        raise ShapeError(
            "kernel wider than padded input",
            dimension="width", expected=f">= {kw}", found=w + 2 * pad,
        )
    return kernels.active().conv2d(x, weights, bias, stride, pad, groups)


def relu(x):
    """Elementwise max(0, x); shape preserved."""
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0.0))


def lrn(x, *, k=1.0, n=5, alpha=1e-4, beta=0.75):
    """Cross-channel local response normalization.

    out[c,h,w] = in[c,h,w] / (k + (alpha/n) * sum_{c' in window(c,n)} in[c',h,w]^2)^beta
    with the channel window of width n clipped at the channel boundaries.
    """
    x = as_tensor(x, rank=3)
    if k <= 0:
        raise ShapeError("lrn requires k > 0", dimension="k", found=k)
    if n < 1 or n % 2 == 0:
        raise ShapeError("lrn window must be odd and >= 1", dimension="n", found=n)
    return kernels.active().lrn(x, float(k), int(n), float(alpha), float(beta))


def maxpool(x, *, size, stride):
    """Per-channel max pooling; output H' = floor((H - size)/stride) + 1."""
    x = as_tensor(x, rank=3)
    if size < 1 or stride < 1:
        raise ShapeError("pool size and stride must be >= 1",
                         dimension="size/stride", found=(size, stride))
    if x.shape[1] < size or x.shape[2] < size:
        raise ShapeError(
            "pool window larger than input",
            dimension="height/width", expected=f">= {size}", found=x.shape[1:],
        )
    return kernels.active().maxpool(x, int(size), int(stride))


def fully_connected(x, weights, bias):
    """weights @ x + bias. Rank-3 inputs are flattened channel-major first."""
    x = as_tensor(x)
    if x.ndim == 3:
        x = x.reshape(-1)  # (C, H, W) row-major == channel-major flattening
    elif x.ndim != 1:
        raise ShapeError("fully_connected input must be rank 1 or rank 3",
                         dimension="rank", found=x.ndim)
    weights = as_tensor(weights, rank=2)
    bias = as_tensor(bias, rank=1)
    m, n = weights.shape
    if x.shape[0] != n:
        raise ShapeError(
            "input length does not match weight columns",
            dimension="input", expected=n, found=x.shape[0],
        )
    if bias.shape[0] != m:
        raise ShapeError(
            "bias length does not match weight rows",
            dimension="bias", expected=m, found=bias.shape[0],
        )
    return kernels.active().matvec(weights, x, bias)


def softmax(x):
    """exp(x - max(x)) / sum(...); components in (0, 1], summing to 1."""
    x = as_tensor(x, rank=1)
    e = np.exp(x.astype(np.float64) - float(x.max()))
    return (e / e.sum()).astype(np.float32)


def dropout_inference(x):
    """Identity at inference time; this pipeline never trains the network."""
    return x
