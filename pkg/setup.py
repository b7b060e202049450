#!/usr/bin/env python
"""
Package metadata for splat_volume.
"""
import os
import re

from setuptools import find_packages, setup

HERE = os.path.dirname(__file__)
REQUIREMENT_PATTERN = re.compile(r"([a-zA-Z0-9\-_.]+(?:\[[a-zA-Z0-9\-_.,\s]+\])?)([<>=!~][^#\s]*)?")


def get_version(*file_paths):
    """
    Extract ``__version__`` from the file at the given path fragments.
    """
    with open(os.path.join(HERE, *file_paths), encoding="utf8") as version_file:
        version_match = re.search(r"^__version__ = ['\"]([^'\"]*)['\"]", version_file.read(), re.M)
    if version_match:
        return version_match.group(1)
    raise RuntimeError("Unable to find version string.")


def is_requirement(line):
    """
    Return True if the line names a package, not a comment, include, URL or constraint file.
    """
    line = line.strip()
    return bool(line) and not line.startswith(("-r", "#", "-e", "git+", "-c"))


def _parse(line):
    match = REQUIREMENT_PATTERN.match(line.strip())
    if not match:
        return None, None
    return match.group(1), match.group(2)


def load_requirements(*requirements_paths):
    """
    Load package requirements from ``.in`` files, pinned by their local ``-c`` constraint files.

    A package may be constrained in one place only; a second, different
    constraint for the same package is an error.
    """
    requirements = {}
    spellings = {}
    constraint_files = []

    def add(package, version, add_if_missing):
        canonical = package.lower().replace("_", "-").split("[")[0]
        if spellings.setdefault(canonical, package) != package:
            raise ValueError(f'Both "{spellings[canonical]}" and "{package}" appear in requirements, use one')
        current = requirements.get(package)
        if current and version and current != version:
            raise ValueError(f"Conflicting constraints for {package}: {current} and {version}")
        if add_if_missing or package in requirements:
            requirements[package] = version or current

    for path in requirements_paths:
        with open(path, encoding="utf8") as reqs:
            for line in reqs:
                if is_requirement(line):
                    add(*_parse(line), add_if_missing=True)
                elif line.startswith("-c") and not line.startswith("-c http"):
                    name = line.split("#")[0].replace("-c", "", 1).strip()
                    constraint_files.append(os.path.join(os.path.dirname(path), name))

    for constraint_file in constraint_files:
        with open(constraint_file, encoding="utf8") as reader:
            for line in reader:
                if is_requirement(line):
                    add(*_parse(line), add_if_missing=False)

    return [f"{package}{version or ''}" for package, version in sorted(requirements.items())]


with open(os.path.join(HERE, "README.rst"), encoding="utf8") as readme:
    README = readme.read()

setup(
    name="splat-volume",
    version=get_version("splat_volume", "__init__.py"),
    description="Feed-forward reconstruction of surfel splat scenes from a few posed images",
    long_description_content_type="text/x-rst",
    long_description=README,
    author="edX",
    author_email="oscm@edx.org",
    url="https://github.com/openedx/splat-volume",
    packages=find_packages(
        include=["splat_volume", "splat_volume.*"],
        exclude=["*tests"],
    ),
    entry_points={
        "lms.djangoapp": [
            "splat-volume = splat_volume.apps:SplatVolumeConfig",
        ],
        "cms.djangoapp": [
            "splat-volume = splat_volume.apps:SplatVolumeConfig",
        ],
    },
    include_package_data=True,
    install_requires=load_requirements("requirements/base.in"),
    python_requires=">=3.10",
    license="AGPL 3.0",
    zip_safe=False,
    keywords="Python edx gaussian-splatting reconstruction",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Framework :: Django",
        "Framework :: Django :: 4.2",
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Image Processing",
    ],
)
