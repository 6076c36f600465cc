"""Build script for the optional compiled simulation core.

The package works without the extension (a pure-Python fallback is selected
at import time); building it makes the training loops roughly two orders of
magnitude faster.  `pip install -e . --no-build-isolation` compiles it when
Cython and a C compiler are available.
"""

import os

import numpy as np
from setuptools import Extension, setup

PYX = "src/coopgrad/_kernels/_core.pyx"

ext_modules = []
if os.path.exists(PYX):
    from Cython.Build import cythonize

    extensions = [
        Extension(
            "coopgrad._kernels._core",
            [PYX],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            # fp-contract off: the pure-Python fallback must stay bit-identical
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )

setup(ext_modules=ext_modules)
