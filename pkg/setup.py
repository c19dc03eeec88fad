import os

from setuptools import Extension, setup

# No fast-math and no FMA contraction: the compiled kernel must reproduce the
# pure-Python episode loop bit for bit.
COMPILE_ARGS = ["-O2", "-ffp-contract=off", "-fno-fast-math"]


def extensions():
    if os.environ.get("QUADPONG_PURE_PYTHON"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "quadpong._ckernel",
        ["src/quadpong/_ckernel.pyx"],
        extra_compile_args=COMPILE_ARGS,
        libraries=["m"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
