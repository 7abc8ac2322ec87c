from setuptools import setup


setup(
    name="vcnac",
    version="0.1.0",
    packages=["vcnac"],
    package_dir={'': 'python'},
    install_requires=[
        "numpy",
        "scipy",
        "soundfile",
        "librosa",
    ],
    entry_points={
        'console_scripts': ['vcnac = vcnac.cli:main'],
    },
    python_requires=">=3.8",
    zip_safe=False,
)
