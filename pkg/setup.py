import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class optional_build_ext(build_ext):
    """Build the LU kernel if possible; the package falls back to numpy otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled LU kernel ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc})")


extensions = []
if cythonize is not None and not int(os.getenv("KKT_SENSE_NO_EXT", "0")):
    extensions = cythonize(
        [Extension("kkt_sense.linalg._lu_ext", ["src/kkt_sense/linalg/_lu_ext.pyx"],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3", "embedsignature": True},
    )

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
