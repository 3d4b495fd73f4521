"""Build script: compiles the optional Maxwell-Bloch stepping kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it makes full-resolution runs ~20x faster.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gemxpm._mbcore",
                ["src/gemxpm/_mbcore.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython / numpy at build time: install pure-Python only.
    pass

setup(ext_modules=ext_modules)
