"""Build script: compiles the optional accelerated kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time).  The extension is built only when Cython, NumPy,
and a C compiler are available in the build environment; any failure to
build it downgrades to the pure-Python install instead of aborting.
"""

from setuptools import Extension, setup

extensions = []
try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "tvreg._kernels_c",
                ["src/tvreg/_kernels_c.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=extensions)
