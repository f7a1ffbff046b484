"""Build hook for the optional compiled kernel.

The package works without the extension (imaxcal.kernels falls back to the
numpy implementation), so a failed cythonize must not break installation.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "imaxcal._alternate_c",
                ["src/imaxcal/_alternate_c.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    import sys

    print(f"imaxcal: building without compiled kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
