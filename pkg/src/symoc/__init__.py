"""Symmetry verification and conservation laws for optimal control.

The package checks one-parameter transformation groups against the
invariance conditions of a control problem, builds the corresponding
conservation law, and confirms the law numerically along Pontryagin
extremals.  See the README for the CLI tour.
"""

__version__ = "0.1.0"

from ._core import BACKEND

__all__ = ["BACKEND", "__version__"]
