import os

from setuptools import setup

ext_modules = []
if os.environ.get("EXCON_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("excon._ckernels", ["src/excon/_ckernels.pyx"], include_dirs=[np.get_include()])],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        # no Cython or NumPy at build time: install the pure-Python backend only
        ext_modules = []

setup(ext_modules=ext_modules)
