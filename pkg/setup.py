import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ESTLORA_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "estlora._kernels",
                    sources=["src/estlora/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        # No Cython available: install pure-Python, the NumPy fallback
        # kernels are selected at import time.
        ext_modules = []

setup(ext_modules=ext_modules)
