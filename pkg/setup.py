"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); any failure to cythonize or compile therefore
degrades gracefully to a pure-Python build. Set RKSTAB_NO_EXTENSION=1 to skip
the extension on purpose.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("RKSTAB_NO_EXTENSION") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "rkstab.kernels._speedups",
                    ["src/rkstab/kernels/_speedups.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except Exception as exc:  # pragma: no cover - build-environment dependent
        print(f"rkstab: building without compiled kernels ({exc!r})")
        ext_modules = []

setup(ext_modules=ext_modules)
