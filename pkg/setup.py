import os

from setuptools import setup

ext_modules = []
if os.environ.get("EDGECACHE_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("edgecache._ckernels", ["src/edgecache/_ckernels.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
