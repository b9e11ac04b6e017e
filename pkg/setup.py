"""Build the optional compiled rollout kernel.

The package works without it: ``hgs.mnode.backend`` falls back to the
numpy implementation when the extension cannot be imported.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("HGS_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "hgs.mnode._rollout_ext",
                    ["src/hgs/mnode/_rollout_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
