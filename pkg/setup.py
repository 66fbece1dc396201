"""Build script: compiles the optional scalar-kernel extension.

The package is fully functional without the extension (a pure-Python
twin of every kernel ships in ``loglip._weightcore_py``); compilation
failures therefore downgrade to a warning instead of aborting the
install.
"""

import warnings

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "loglip._weightcore",
                sources=["src/loglip/_weightcore.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    warnings.warn(f"building without compiled kernels ({exc})")
    extensions = []

setup(ext_modules=extensions)
