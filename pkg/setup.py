"""Build script for the optional compiled convolution kernels.

The package is fully functional without the extension: ``vins.net.kernels``
falls back to the numpy implementation when ``vins.net._conv_cy`` is not
importable.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "vins.net._conv_cy",
                sources=["src/vins/net/_conv_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
