from setuptools import setup, find_packages
import os

# Read the version without importing the package (its __init__ pulls in runtime deps).
_version_ns = {}
with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), "spcelab", "version.py")) as _vf:
    exec(_vf.read(), _version_ns)
__version__ = _version_ns["__version__"]

with open("README.md", "r") as fh:
    long_description = fh.read()

with open("requirements.txt") as f:
    required = f.read().splitlines()

setup(
    name="spcelab",
    version=__version__,
    description="Monte Carlo lab for spin polarization correlation experiments: CHSH tests, hidden-variable "
                "event generators, coincidence analysis, purity tests and AR time-series diagnostics.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests", "tests.*")),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.9",
    install_requires=required,
    extras_require={"test": ["pytest>=7"]},
    entry_points={"console_scripts": ["spcelab=spcelab.cli:main"]},
    license="MIT",
)
