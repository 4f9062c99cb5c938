"""Build script: compiles the optional fast evaluator extension.

The extension is a pure speedup; if Cython or a C compiler is missing the
build continues and the package falls back to the pure-Python evaluator.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to the pure-Python backend on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            warnings.warn(f"skipping compiled evaluator ({exc}); "
                          f"symoc will use the pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            warnings.warn(f"skipping {ext.name} ({exc}); "
                          f"symoc will use the pure-Python backend")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        ["src/symoc/_core/_speedups.pyx"],
        language_level="3",
    )
except ImportError:  # pragma: no cover - toolchain dependent
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
