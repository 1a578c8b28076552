"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure numpy fallback is picked
at import time), so a failed compile only costs speed, not functionality.
"""

import sys

from setuptools import setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        print("cython/numpy unavailable; building without compiled kernels",
              file=sys.stderr)
        return []
    try:
        return cythonize(
            ["src/sbrbench/kernels/_speedups.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # fall back to the pure backend
        print(f"cythonize failed ({exc}); building without compiled kernels",
              file=sys.stderr)
        return []


def include_dirs():
    try:
        import numpy

        return [numpy.get_include()]
    except ImportError:
        return []


setup(ext_modules=extensions(), include_dirs=include_dirs())
