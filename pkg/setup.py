import numpy
from setuptools import Extension, setup

# The compiled kernel is optional: the package falls back to the pure-numpy
# implementation when the extension is unavailable (see anisogeo._dispatch).
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "anisogeo._kernels",
                ["src/anisogeo/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
