"""Build script: compiles the optional Cython scan kernel.

The package works without the extension (a pure-Python matcher is selected
at import time), so a failed compile only costs throughput.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        ["src/clozeprobe/corpusfreq/_scan.pyx"],
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.include_dirs.append(np.get_include())
except Exception as exc:  # no Cython / no compiler: install pure-Python only
    print(f"clozeprobe: skipping C extension build ({exc})")

setup(ext_modules=ext_modules)
