"""Build script: compiles the optional Cython kernel for the tomography cost.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only degrades speed. Set SPINORB_NO_EXT=1
to skip the extension build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SPINORB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "spinorb._kernels._mle_cy",
            ["src/spinorb/_kernels/_mle_cy.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover - build-env dependent
        print(f"spinorb: skipping Cython extension ({exc}); pure-python fallback will be used")

setup(ext_modules=ext_modules)
