"""Build script: compiles the optional texture-kernel extension.

The package works without it (pure-NumPy fallback); the extension is
marked optional so a missing compiler degrades to the fallback instead
of failing the install.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension(
            "radflavour.features._ckernels",
            ["src/radflavour/features/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            optional=True,
        )],
        language_level=3,
    )

setup(ext_modules=ext_modules)
