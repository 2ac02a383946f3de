import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        extdir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)
        cfg = "Release"
        cmake_args = [
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={extdir}",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
            f"-DCMAKE_BUILD_TYPE={cfg}",
            "-DMESPI_BUILD_PYTHON=ON",
        ]
        try:
            cmakedir = subprocess.check_output(
                [sys.executable, "-m", "pybind11", "--cmakedir"], text=True
            ).strip()
            cmake_args.append(f"-Dpybind11_DIR={cmakedir}")
        except (subprocess.CalledProcessError, FileNotFoundError):
            pass
        subprocess.run(
            ["cmake", str(source_dir), *cmake_args], cwd=build_dir, check=True
        )
        jobs = str(os.cpu_count() or 1)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_mespi", "-j", jobs],
            cwd=build_dir,
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("mespi._mespi")],
    cmdclass={"build_ext": CMakeBuild},
)
