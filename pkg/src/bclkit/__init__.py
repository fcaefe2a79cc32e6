"""Finite models of pure commuting isometric pairs over a two-letter Fock space."""

from .errors import *  # noqa: F401,F403
from .numcore import Frame, Spectrum
from .model import (
    BclTriple,
    GradedVector,
    StructuredPair,
    build_pair,
    random_triple,
    validate_triple,
)

__version__ = "0.1.0"
