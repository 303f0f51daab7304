"""
Setup script for bklab
"""
from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [
        line.split("#")[0].strip()
        for line in fh
        if line.split("#")[0].strip()
    ]

DEV_TOOLS = ("pytest", "black", "flake8", "pre-commit")

setup(
    name="bklab",
    version="0.1.0",
    author="bklab Team",
    description="Main-term reconstruction of 2D potentials with mollifier, angular, radial and frequency averaging",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["config", "run"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=[r for r in requirements if not r.startswith(DEV_TOOLS)],
    extras_require={
        "dev": [
            "pytest>=7.0",
            "black>=23.0",
            "flake8>=6.0",
            "pre-commit>=3.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "bklab=run:main",
        ],
    },
    include_package_data=True,
    package_data={
        "src.phantoms": ["presets/*.json"],
        "src.experiment": ["suites/*.json"],
    },
)
