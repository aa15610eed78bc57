from setuptools import setup, find_packages

setup(
    name='coldstart-mpt',
    version='0.3.0',
    author='xikest',
    description='multi-strategy pre-training for cold-start recommendation',
    packages=find_packages(exclude=['examples', 'examples.*']),
    package_data={'coldstart_research': ['data/dataset/*.tsv']},
    python_requires='>=3.9',
    install_requires=[
        'numpy', 'pandas', 'scipy',
        'tqdm',
        'scikit-learn',
        'plotly', 'pydantic>=2',
    ],
    extras_require={
        'test': ['pytest'],
    },

    entry_points={
        'console_scripts': [
            'coldstart = coldstart_research.pipeline.cli:main',
        ],
    },
)
