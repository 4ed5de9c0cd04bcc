import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# no fused multiply-add, so the compiled loops round exactly like the Python twin
ext = Extension(
    "flatlab._kernels",
    ["src/flatlab/_kernels.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O2", "-ffp-contract=off"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))
