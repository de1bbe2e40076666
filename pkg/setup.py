from setuptools import Extension, setup

import numpy as np
from Cython.Build import cythonize

ext_modules = cythonize(
    [
        Extension(
            "facetmpc._kernels._simplex",
            ["src/facetmpc/_kernels/_simplex.pyx"],
            include_dirs=[np.get_include()],
            # contraction off so the compiled kernel matches the NumPy
            # fallback pivot-for-pivot
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
    ],
    language_level=3,
)

setup(ext_modules=ext_modules)
