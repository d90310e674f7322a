"""Builds the optional C kernel extension.

The package works without it: dialret.kernels falls back to the numpy
implementation when the compiled module is absent (or when the build
is skipped via DIALRET_SKIP_EXT=1).
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DIALRET_SKIP_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "dialret.kernels._ckern",
            ["src/dialret/kernels/_ckern.pyx"],
            extra_compile_args=["-O3"],
        )
        ext.optional = True
        ext_modules = cythonize(
            [ext],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
