import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernels are an optimization, not a requirement: every entry
# point falls back to the pure implementations in sonogrid._kernels_py when
# the extension is missing (see sonogrid.kernels).
extensions = [
    Extension(
        "sonogrid._kernels",
        ["src/sonogrid/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
