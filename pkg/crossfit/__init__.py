"""
crossfit.

Binary-response mixed models with two crossed random effects, fitted by a
modified Schall iteration whose inner solves cost O(N).
"""

__version__ = "1.0.0"
