"""Kernel backend selection.

Two interchangeable implementations of the hot layer kernels exist:

* ``featpipe.kernels._native`` — Cython extension, built by setup.py.
* ``featpipe.kernels.numpy_backend`` — vectorized numpy fallback.

The default is a hybrid that routes each operation to the faster of the
two as measured by benchmarks/bench_kernels.py: convolution and LRN go
through BLAS-backed numpy (the scalar C loops cannot compete with a tuned
matmul), pooling and the fully-connected matvec go through the extension.
Set ``FEATPIPE_KERNELS`` to ``native``, ``numpy`` or ``hybrid`` to force a
choice (forcing a native path when the extension is missing raises). Tests
use :func:`use_backend` to run the same suites against both pure paths.
"""

import contextlib
import os

from . import numpy_backend

try:
    from . import _native
    HAVE_NATIVE = True
except ImportError:
    _native = None
    HAVE_NATIVE = False


class _Hybrid:
    """Fastest measured implementation per operation; see module docstring."""

    NAME = "hybrid"

    def __init__(self, native, fallback):
        self.conv2d = fallback.conv2d
        self.lrn = fallback.lrn
        self.maxpool = native.maxpool
        self.matvec = native.matvec


_hybrid = _Hybrid(_native, numpy_backend) if HAVE_NATIVE else None


def _require_native(name):
    if not HAVE_NATIVE:
        raise ImportError(
            f"FEATPIPE_KERNELS={name} but the compiled extension is not "
            "built; run `python setup.py build_ext --inplace`"
        )


def _select_default():
    forced = os.environ.get("FEATPIPE_KERNELS", "").strip().lower()
    if forced in ("numpy", "fallback"):
        return numpy_backend
    if forced == "native":
        _require_native(forced)
        return _native
    if forced == "hybrid":
        _require_native(forced)
        return _hybrid
    if forced:
        raise ImportError(f"unknown FEATPIPE_KERNELS value: {forced!r}")
    return _hybrid if HAVE_NATIVE else numpy_backend


_active = _select_default()


def active():
    """The currently selected backend module."""
    return _active


def backend_name():
    return _active.NAME


def get_backend(name):
    if name == "native":
        if not HAVE_NATIVE:
            raise ImportError("native kernel extension is not built")
        return _native
    if name == "numpy":
        return numpy_backend
    if name == "hybrid":
        if not HAVE_NATIVE:
            raise ImportError("native kernel extension is not built")
        return _hybrid
    raise ValueError(f"unknown backend {name!r}")


@contextlib.contextmanager
def use_backend(name):
    """Temporarily force a backend (test hook)."""
    global _active
    previous = _active
    _active = get_backend(name)
    try:
        yield _active
    finally:
        _active = previous
