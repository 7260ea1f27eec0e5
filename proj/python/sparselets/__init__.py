"""Sparse edge coding of natural images: log-Gabor matching pursuit, sparse
Hebbian learning and edge co-occurrence priors."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
