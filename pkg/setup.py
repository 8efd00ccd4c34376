import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the compiled kernels when a toolchain is present, otherwise warn.

    The package imports fine without the extension; `netquant._backend`
    falls back to the numpy implementations in `_kernels_py`.
    """

    def run(self):
        try:
            super().run()
        except Exception as exc:
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "warning: building netquant._kernels failed (%s); "
            "the pure-python backend will be used" % (exc,)
        )


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "netquant._kernels",
                ["src/netquant/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
