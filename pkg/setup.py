"""Build script for the compiled kernel core.

The package works without the extension (a numpy fallback is selected at
import time). When it is built, the default hybrid backend routes pooling
and the fully-connected matvec through it, which roughly halves a full
forward pass (see benchmarks/bench_kernels.py). Build in place with:

    python setup.py build_ext --inplace
"""

from setuptools import setup
from setuptools.extension import Extension

import numpy as np
from Cython.Build import cythonize

ext = Extension(
    "featpipe.kernels._native",
    ["src/featpipe/kernels/_native.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-march=native", "-funroll-loops"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level="3"))
