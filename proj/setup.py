from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

# Only the solver core goes into the extension; the services stay C++-only.
ext = Pybind11Extension(
    "shmpose._shmpose",
    sources=["python/module.cpp", "src/kinematics.cpp"],
    include_dirs=["include"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
