import os

import numpy as np
from setuptools import Extension, setup

# Build the compiled kernels when Cython is importable; the package falls back
# to numpy implementations at import time otherwise.
ext_modules = []
if os.environ.get("ANYTHREAT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "anythreat._ckernels",
                    ["src/anythreat/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
