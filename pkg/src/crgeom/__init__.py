"""Numerical CR geometry on the 3-sphere and its lens quotients."""
__version__ = "0.1.0"
