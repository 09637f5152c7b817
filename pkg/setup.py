import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the fallback kernels are used
    cythonize = None

numpy_root = os.path.dirname(np.__file__)

ext_modules = []
if cythonize is not None and not os.environ.get("BONDPERC_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "bondperc._ckernels",
                ["src/bondperc/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[
                    os.path.join(numpy_root, "random", "lib"),
                    os.path.join(numpy_root, "_core", "lib"),
                ],
                libraries=["npyrandom", "npymath", "m"],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
