from setuptools import find_packages, setup

version = '0.1.0.dev0'

setup(name='critforest.scaling',
      version=version,
      description='Critical random forests: exact counts, samplers, exploration chain and the limiting diffusion',
      long_description=f'{open("README.rst").read()}\n{open("CHANGELOG.rst").read()}',
      author='critforest developers',
      url='https://github.com/critforest/critforest.scaling',
      license='GPL3',
      packages=find_packages(exclude=['ez_setup']),
      namespace_packages=['critforest'],
      include_package_data=True,
      package_data={'critforest.scaling': ['tests/fixtures/*.json']},
      zip_safe=False,
      python_requires='>=3.8',
      install_requires=[
          'setuptools',
          'numpy',
          'scipy',
          'tqdm',
      ],
      extras_require={
          'test': ['pytest'],
      },
      entry_points={
          'console_scripts': [
              'critforest = critforest.scaling.runner:main',
          ]
      })
