import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the lattice-kernel extension if possible; the package falls
    back to the pure-numpy kernels when it is missing."""

    def run(self):
        try:
            super().run()
        except Exception as err:
            self._warn(err)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as err:
            self._warn(err)

    @staticmethod
    def _warn(err):
        print(
            f"WARNING: compiled kernels skipped ({err}); "
            "using the pure-numpy fallback",
            file=sys.stderr,
        )


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as err:
        OptionalBuildExt._warn(err)
        return []
    return cythonize(
        [
            Extension(
                "clintag._crf_cy",
                ["src/clintag/_crf_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
