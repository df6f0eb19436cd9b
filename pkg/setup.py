import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SPIKENET_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "spikenet._ckernels",
                ["src/spikenet/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: results must match the Python backend bit for bit
                extra_compile_args=["-O2"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
