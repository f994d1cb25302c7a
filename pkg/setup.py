"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy backend is selected at
import time), so compilation failures are non-fatal.
"""

import numpy
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "robust_sysid._kernels",
                ["src/robust_sysid/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"warning: Cython extension not built ({exc}); pure backend will be used")

setup(ext_modules=ext_modules)
