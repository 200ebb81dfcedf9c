"""Bose-Hubbard light-cone simulator on finite lattices with capped occupations."""

__version__ = "0.1.0"

from .errors import ConfigError, InsufficientData, InvalidArgument, NotInBasis, NumericalFailure
from .lattice import Lattice, SiteSet, ball, diameter, edges, enlarge, make_lattice
from .fock import FockBasis, apply_hop, enumerate_basis
from .operators import HubbardParams, build_hamiltonian, number_operator, second_quantize

__all__ = [
    "__version__",
    "ConfigError", "InsufficientData", "InvalidArgument", "NotInBasis", "NumericalFailure",
    "Lattice", "SiteSet", "ball", "diameter", "edges", "enlarge", "make_lattice",
    "FockBasis", "apply_hop", "enumerate_basis",
    "HubbardParams", "build_hamiltonian", "number_operator", "second_quantize",
]
