import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SCATTER_CRYPT_NO_EXT", "") in ("", "0"):
    from Cython.Build import cythonize

    ext = Extension(
        "scatter_crypt._ckernels",
        ["src/scatter_crypt/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
    )
    ext_modules = cythonize([ext])

setup(ext_modules=ext_modules)
