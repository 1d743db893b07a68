"""Build the optional Cython kernels; installation proceeds without them."""
import logging

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            logging.warning("compiled kernels skipped: %s", exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            logging.warning("compiled kernel %s skipped: %s", ext.name, exc)


ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "coldec._ckernels",
                ["src/coldec/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
