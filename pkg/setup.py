"""Build script for the compiled fitting kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed compilation is not fatal.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sigtrial._bivfit_c",
                ["src/sigtrial/_bivfit_c.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
