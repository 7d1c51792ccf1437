from setuptools import setup

setup()  # metadata, dependencies and entry points are declared in setup.cfg
