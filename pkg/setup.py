"""
hlmax Setup Script
"""
from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.split("#")[0].strip() for line in fh if line.strip() and not line.startswith("#")]

runtime = [r for r in requirements if not r.startswith(("pytest", "hypothesis"))]
testing = [r for r in requirements if r.startswith(("pytest", "hypothesis"))]

setup(
    name="hlmax",
    version="1.0.0",
    author="hlmax developers",
    description="Hardy-Littlewood maximal and integral-functions on metric measure spaces",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests", "tests.*")),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
    install_requires=runtime,
    extras_require={"test": testing},
    entry_points={
        "console_scripts": [
            "hlmax=hlmax.main:run_cli",
        ],
    },
)
