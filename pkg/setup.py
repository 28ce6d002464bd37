"""Builds the optional compiled kernel for the pairwise field updates.

The package works without it: opvi.fieldops falls back to the numpy
implementation when the extension is missing.
"""
from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "opvi._fieldops",
                ["src/opvi/_fieldops.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
