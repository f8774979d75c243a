import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "kurasync._rk4",
        ["src/kurasync/_rk4.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O2"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
