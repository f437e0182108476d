"""Build script for the optional compiled stepping kernel.

The package is fully functional without the extension; ssnet.kernels falls
back to the pure numpy implementation when ssnet._speedups is absent.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "ssnet._speedups",
        ["src/ssnet/_speedups.pyx"],
        extra_compile_args=["-O3"],
    )
    ext.optional = True
    ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
