"""Build script for the optional compiled extension.

The package works without the extension (a pure numpy fallback is selected
at import time); compiling it speeds up the exact many-body kernels by
roughly an order of magnitude.  `optional=True` keeps a failed compile from
breaking the install.
"""
import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "fermitrace._ed_cy",
        ["src/fermitrace/_ed_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
