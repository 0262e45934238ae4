# Builds the optional compiled kernels; the package falls back to pure Python
# when the extension is absent (ROUTEIO_NO_EXT=1 skips the build).
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ROUTEIO_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "routeio._kernels",
                ["src/routeio/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
