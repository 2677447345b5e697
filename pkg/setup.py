"""Build script: compiles the optional native kernels when a toolchain is present.

The package is fully functional without the extension; nsdstab._kernels
falls back to the numpy implementation at import time.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Tolerate a failed extension build instead of aborting the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            warnings.warn(f"native kernels not built ({exc}); using pure-python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            warnings.warn(f"native kernels not built ({exc}); using pure-python fallback")


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build environment dependent
        return []
    ext = Extension(
        "nsdstab._kernels._native",
        sources=["src/nsdstab/_kernels/_native.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
