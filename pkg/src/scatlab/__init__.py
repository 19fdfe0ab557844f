"""scatlab: fixed-energy partial-wave scattering and transformation operators.

Modules
-------
specfun     Riccati-Bessel functions, complex log-Gamma, Legendre polynomials
potentials  compactly supported radial potentials and their differences
catalog     named test potentials
radial      regular solutions, phase shifts, partial-wave amplitudes
kernel      the transformation-operator kernel via its Volterra equation
analysis    orthogonality functionals, analytic-class checks, index sets
cli         the ``scatlab`` batch runner
"""
__version__ = "0.1.0"

from .errors import (DomainError, NonConvergenceError, PotentialError, PotentialParseError,
                     PotentialValidationError, ScatlabError, UnderflowWarning)
from .potentials import DifferencePotential, Potential, difference, load_potential

__all__ = [
    "__version__", "DifferencePotential", "DomainError", "NonConvergenceError", "Potential",
    "PotentialError", "PotentialParseError", "PotentialValidationError", "ScatlabError",
    "UnderflowWarning", "difference", "load_potential",
]
