"""Numerical laboratory for feature learning on finite-group arithmetic tasks"""

__version__ = "0.1.0"
