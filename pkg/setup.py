from setuptools import find_packages, setup

setup(
    name='cardy-lattices',
    packages=find_packages(exclude=['tests']),
    version='0.1.0',
    description='Crossing probabilities of critical site percolation on '
    'stretched triangular and rotated square lattices',
    license='GPL-3.0',
    install_requires=[
        'click', 'joblib', 'numpy', 'pandas', 'python-dotenv', 'scipy', 'tqdm'
    ],
    entry_points={
        'console_scripts':
        ['cardy-lattices=cardy_lattices.experiments.cli:main'],
    },
)
