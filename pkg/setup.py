"""Build script for the optional GMP-backed arithmetic kernel.

The extension is a speedup only: if it cannot be compiled (no compiler,
no libgmp, or PRIVLOC_NO_EXT=1), the package installs anyway and falls
back to the pure-Python arithmetic in privloc.backend.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except (CCompilerError, ExecError, PlatformError, OSError) as exc:
            print(f"warning: skipping native extension ({exc}); "
                  "pure-Python backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, OSError) as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  "pure-Python backend will be used")


ext_modules = []
cmdclass = {}
if not os.environ.get("PRIVLOC_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("privloc._speedups",
                       ["src/privloc/_speedups.pyx"],
                       libraries=["gmp"])],
            language_level=3,
        )
        cmdclass = {"build_ext": OptionalBuildExt}
    except ImportError:
        print("warning: Cython not available; building without native extension")

setup(ext_modules=ext_modules, cmdclass=cmdclass)
