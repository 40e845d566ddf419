import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name, sourcedir=""):
        super().__init__(name, sources=[])
        self.sourcedir = str(Path(sourcedir).resolve())


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        extdir = Path(self.get_ext_fullpath(ext.name)).parent.resolve()
        build_temp = Path(self.build_temp) / ext.name
        build_temp.mkdir(parents=True, exist_ok=True)

        configure = [
            "cmake",
            ext.sourcedir,
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={extdir}/",
            f"-DPython3_EXECUTABLE={sys.executable}",
            "-DCMAKE_BUILD_TYPE=Release",
            "-DRANCOR_BUILD_PYTHON=ON",
        ]
        subprocess.run(configure, cwd=build_temp, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_rancor", "--parallel"],
            cwd=build_temp,
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("rancor._rancor")],
    cmdclass={"build_ext": CMakeBuild},
)
