"""Build script: compiles the optional Cython convolution kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler or Cython only costs speed.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class OptionalBuildExt(build_ext):
    """Best-effort extension build: warn instead of failing the install."""

    def run(self):
        try:
            super().run()
        except (PlatformError, FileNotFoundError) as exc:
            print(f"warning: skipping compiled kernels ({exc}); "
                  "using pure-numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, ValueError) as exc:
            print(f"warning: could not compile {ext.name} ({exc}); "
                  "using pure-numpy fallback")


def extension_modules():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "smart_har.nn.kernels._convkernels",
                ["src/smart_har/nn/kernels/_convkernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )


setup(ext_modules=extension_modules(), cmdclass={"build_ext": OptionalBuildExt})
