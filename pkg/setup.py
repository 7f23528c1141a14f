"""Builds the optional compiled search kernel.

The package is fully functional without the extension; pcsp.core falls back
to the vectorised numpy kernel when the import fails.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("pcsp._kernel", ["src/pcsp/_kernel.pyx"])],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
