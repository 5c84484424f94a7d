"""Build the optional compiled kernels.

The package works without them: ``walksieve.kernels`` falls back to the
numpy implementation when the extension is missing.
"""
import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("WALKSIEVE_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "walksieve._kernels",
                ["src/walksieve/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
