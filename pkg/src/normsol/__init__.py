"""Normalized solutions of a two-component radial Schrodinger system.

The system couples two components through a Sobolev-critical term
nu |u|^{alpha-2} u |v|^beta with alpha + beta = 2*, each component also
carrying a power nonlinearity omega_i |u_i|^{p-2} u_i, and prescribes the
L2 masses (a, b).  The package computes the constants entering the
existence statements, the scalar ground state, the fiber-map structure,
constrained solutions, and checks tying the numbers back to the statements.
"""

from .constants import ProblemParams, Regime, classify_regime, compute_constants
from .errors import NormsolError
from .grid import RadialField, RadialGrid, StatePair, default_grid, make_grid

__all__ = [
    "ProblemParams", "Regime", "classify_regime", "compute_constants", "NormsolError",
    "RadialField", "RadialGrid", "StatePair", "default_grid", "make_grid",
]

__version__ = "0.1.0"
