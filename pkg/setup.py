from setuptools import setup

setup(
    name="dprules",
    version="0.1.0",
    packages=["dprules"],
    package_dir={'dprules': 'dprules'},
    package_data={'dprules': ["data/*.*"]},
    include_package_data=True,
    python_requires=">=3.8",
    install_requires=["pandas>=2.0",
                      "numpy>=1.20",
                      "scipy>=1.7",
                      "scikit-learn>=1.0",
                      "networkx>=2.6",
                      "lxml>=4.6",
                      "matplotlib>=3.5",
                      "graphviz>=0.17",
                      "requests>=2.21.0",
                      "pyyaml>=5.3"
                      ],
    extras_require={"test": ["pytest>=6.0", "pytest-cov>=2.10", "pm4py>=2.7"]},
    entry_points={"console_scripts": ["dprules = dprules.cli:main"]},
    license="MIT",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: MIT",
        "Programming Language :: Python :: 3.x",
        "Topic :: Scientific/Engineering :: Information Analysis",
    ],
    description='Discriminative rules and process models for desirable and '
                'undesirable cases of event logs'
)
