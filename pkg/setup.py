from setuptools import setup
from setuptools import find_packages


setup(name='permexp',
      version='0.1.0',
      description='Simulation and pseudo-likelihood inference for exponential families on permutations',
      license='MIT',
      python_requires='>=3.6',
      install_requires=['numpy>=1.20', 'scipy>=1.4', 'cloudpickle'],
      extras_require={
          'wandb': ['wandb'],
          'tests': ['pytest', 'pytest-xdist'],
      },
      entry_points={
          'console_scripts': ['permexp = permexp.cli:main'],
      },
      packages=find_packages(exclude=('tests', 'tests.*')))
