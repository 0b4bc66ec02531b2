"""Build script for the optional compiled kernel extension.

The package works without the extension (evabs._backend falls back to the
pure-Python kernels), so a missing Cython or C compiler must not make the
install fail: we just skip the extension in that case.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "evabs._kernels",
                sources=["src/evabs/_kernels.pyx"],
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

setup(ext_modules=ext_modules)
