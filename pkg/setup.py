"""Build the optional Cython stepper.

If Cython or a C compiler is missing the package still installs and
falls back to the pure-Python stepper at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SPINMECH_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension(
                "spinmech.sim._kernel",
                ["src/spinmech/sim/_kernel.pyx"],
                # no fast-math or sin/cos -> sincos merging: keeps bitwise agreement with the fallback
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-builtin-sin", "-fno-builtin-cos"],
            )],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
