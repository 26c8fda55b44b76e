"""Jacobi spectral solver for the two-sided variable-coefficient fractional diffusion equation."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, NumericalFailure, ParseError, PreconditionError
from .problems import ExampleConfig, example1, example2, load_custom
from .solver import PowerSum, ProblemSpec, SpectralSolution, assemble, beta_from_r, r_from_beta

__all__ = [
    "ConfigError",
    "DomainError",
    "ExampleConfig",
    "NumericalFailure",
    "ParseError",
    "PowerSum",
    "PreconditionError",
    "ProblemSpec",
    "SpectralSolution",
    "assemble",
    "beta_from_r",
    "example1",
    "example2",
    "load_custom",
    "r_from_beta",
]
