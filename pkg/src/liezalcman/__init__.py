"""Exponential maps on complex Lie groups, Marty scans and Zalcman rescaling."""

__version__ = "0.1.0"
