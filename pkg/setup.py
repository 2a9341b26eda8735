"""Build script for the optional compiled integrator core.

The package works without the extension (a numpy fallback is selected at
import time), so a failed build is downgraded to a warning.
"""

import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"mslspec: Cython/numpy unavailable ({exc}); building without "
              "the compiled core", file=sys.stderr)
        return []
    ext = Extension(
        "mslspec._core._ckernels",
        ["src/mslspec/_core/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=_extensions())
