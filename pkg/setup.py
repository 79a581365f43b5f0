"""Builds the compiled interpreter kernel when Cython is available.

The kernel source is the pure-Python module; it is copied to a .pyx and
compiled as `causal_audit._kernel_c`. Without Cython (or a C compiler) the
package installs pure Python and `causal_audit.kernel` falls back.
"""

import shutil
from pathlib import Path

from setuptools import setup
from setuptools.command.build_ext import build_ext

HERE = Path(__file__).parent
PY_SRC = HERE / "src" / "causal_audit" / "_kernel_py.py"
PYX = HERE / "src" / "causal_audit" / "_kernel_c.pyx"


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as e:  # no compiler: keep the pure-Python kernel
            print(f"warning: compiled kernel not built ({e}); using pure Python")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as e:
            print(f"warning: could not build {ext.name} ({e}); using pure Python")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    shutil.copyfile(PY_SRC, PYX)
    try:
        return cythonize(
            [str(PYX.relative_to(HERE))],
            compiler_directives={"language_level": "3", "binding": True},
            quiet=True,
        )
    except Exception as e:
        print(f"warning: cythonize failed ({e}); using pure Python")
        return []


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
