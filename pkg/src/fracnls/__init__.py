"""Fractional nonlinear Schrodinger equations on the torus: explicit estimates,
certified existence windows and a Picard/Duhamel solver."""

__version__ = "0.1.0"

from .spectral import SpectralField, PhysicalField, TorusGrid, forward_transform, inverse_transform
from .nonlinearity import builtin, NonVanishingError
from .solver import SolverConfig, integrate, solve_window, rk4_oracle, lipschitz_probe

__all__ = [
    "SpectralField",
    "PhysicalField",
    "TorusGrid",
    "forward_transform",
    "inverse_transform",
    "builtin",
    "NonVanishingError",
    "SolverConfig",
    "integrate",
    "solve_window",
    "rk4_oracle",
    "lipschitz_probe",
]
