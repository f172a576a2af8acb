"""Fractional g-Laplacian eigenvalue problems on 1-D domains."""

__version__ = "0.1.0"
