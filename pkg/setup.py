"""Builds the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so build failures here degrade gracefully rather than abort
the install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "manipkit._kernels._core",
                ["src/manipkit/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
