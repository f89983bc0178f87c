"""Monte Carlo and closed-form tools for continuous position measurement of a free mass."""

from .errors import SqlsimError
from .model import HBAR, GaussianMoments, NoiseStream, PhysicalParams, natural_units, validate_params

__all__ = [
    "HBAR",
    "GaussianMoments",
    "NoiseStream",
    "PhysicalParams",
    "SqlsimError",
    "natural_units",
    "validate_params",
]
__version__ = "0.1.0"
