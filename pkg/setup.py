import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("RDBP_NO_EXTENSION"):
    ext_modules = cythonize(
        [
            Extension(
                "rdbp._core",
                ["src/rdbp/_core.pyx"],
                include_dirs=[numpy.get_include()],
                library_dirs=[os.path.join(os.path.dirname(numpy.__file__), "random", "lib")],
                libraries=["npyrandom", "m"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
