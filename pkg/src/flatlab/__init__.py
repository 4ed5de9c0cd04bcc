"""Numerical laboratory for translation surfaces and their renormalization dynamics."""
__version__ = "0.1.0"
