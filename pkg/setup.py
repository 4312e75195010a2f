"""
Setup script for SoroSense
"""
from setuptools import setup, find_packages
from pathlib import Path

# Read the contents of README file
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text(encoding='utf-8')

setup(
    name='sorosense',
    version='1.0.0',
    author='SoroSense Team',
    description='Проприоцепция на пружинных сенсорах и IMU и управление мягким пневматическим манипулятором',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    py_modules=['main'],
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.24.0',
        'scipy>=1.10.0',
        'pandas>=2.0.0',
        'matplotlib>=3.7.0',
        'rich>=13.7.0',
        'python-dotenv>=1.0.0',
        'click>=8.1.7',
    ],
    extras_require={
        'tests': ['pytest>=7.4.0'],
    },
    entry_points={
        'console_scripts': [
            'sorosense=main:main',
        ],
    },
    include_package_data=True,
)
