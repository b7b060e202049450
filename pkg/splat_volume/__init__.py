"""
Feed-forward reconstruction of 2D Gaussian surfel scenes from a few posed images.
"""

__version__ = "0.1.0"
