import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled SSA kernel is optional: without Cython the package falls back
# to the pure-Python kernel.  FP contraction is disabled so that both kernels
# round identically.
ext_modules = []
if cythonize is not None and not os.environ.get("ENTITY_KINETICS_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "entity_kinetics._ssa_kernel",
                ["src/entity_kinetics/_ssa_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                libraries=["m"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
