"""Build script: compiles the optional training kernel extension."""
from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "leurn._kernel_c",
                ["src/leurn/_kernel_c.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # no Cython available: install the pure NumPy backend only
    extensions = []

setup(ext_modules=extensions)
