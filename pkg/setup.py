"""Build the optional Cython kernels.

The package works without the extension (a NumPy fallback is selected at
import time), but the compiled kernels make dense warping and block
matching several times faster.  -ffp-contract=off keeps the C arithmetic
bitwise-comparable with the NumPy reference path.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "roadparallax._kernels._fast",
        ["src/roadparallax/_kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
