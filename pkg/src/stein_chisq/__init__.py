"""Stein-method tools for gamma and chi-square approximation."""
__version__ = "0.1.0"
