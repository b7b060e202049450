"""
Shared test fixtures: Django test settings, scene and camera factories and reference renders.

``tests`` is not a package, so helpers used by more than one test module live here.
"""
