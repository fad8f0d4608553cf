from setuptools import Extension, setup

import numpy as np

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "tunnelkit.kernels._ext",
        ["src/tunnelkit/kernels/_ext.pyx"],
        include_dirs=[np.get_include()],
        # -fcx-limited-range: inline complex multiplies (no __muldc3 calls);
        # plain formula, still strict IEEE adds/muls, fully deterministic
        extra_compile_args=["-O3", "-fcx-limited-range"],
    )
]

if cythonize is not None:
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
else:
    ext_modules = []

setup(ext_modules=ext_modules)
