"""Build hook for the optional Cython kernels.

The package is usable without a compiler: if Cython or a C toolchain is
missing, the extension is skipped and ``panelreg.kernels`` falls back to
the numpy implementation.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PANELREG_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "panelreg._kernels",
                    ["src/panelreg/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
