from setuptools import find_packages, setup

LATEST_VERSION = "0.1.0"

exclude_packages = [
    "tests",
    "tests.*",
    "evals",
    "evals.*",
]

with open(r"README.md", "r", encoding="utf-8") as f:
    long_description = f.read()

with open("requirements.txt", "r") as f:
    reqs = [line.strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name="joint-pruner",
    version=LATEST_VERSION,
    description="Joint block-wise and channel-wise pruning search for residual CNNs",
    package_dir={'joint_pruner': 'joint_pruner'},
    packages=find_packages(exclude=exclude_packages),
    py_modules=["cli"],
    package_data={"joint_pruner.config": ["variables/*.json"]},
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    classifiers=[
        "License :: OSI Approved :: MIT License",
        "Intended Audience :: Developers",
        "Intended Audience :: Education",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires='>=3.11',
    install_requires=reqs,
    entry_points={"console_scripts": ["joint-pruner=cli:main"]},
)
