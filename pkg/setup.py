from setuptools import setup, find_packages

setup(
    name="starfactor",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "pandas",
        "scipy",
        "tqdm",
        "networkx"
    ],
    extras_require={
        "test": ["pytest", "hypothesis"]
    },
    entry_points={
        "console_scripts": ["starfactor=starfactor.cli:main"]
    },
)
