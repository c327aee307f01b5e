"""Build script: compiles the optional step-kernel extension.

The extension is a performance twin of the pure-Python kernel; if Cython or
a C compiler is unavailable (or CERTLQ_NO_EXTENSION=1 is set) the package
installs without it and falls back at import time.  fp-contract is disabled
so the compiled kernel matches the pure kernel bit for bit.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CERTLQ_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "certlq._stepper_cy",
                    ["src/certlq/_stepper_cy.pyx"],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
