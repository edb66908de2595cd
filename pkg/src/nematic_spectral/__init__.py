"""Spectral simulation and Green-function analysis of 3D active nematic flows."""

from .grid import GridSpec, SpectralState
from .qtensor import Phase, PhysParams

__version__ = "0.1.0"

__all__ = ["GridSpec", "SpectralState", "PhysParams", "Phase", "__version__"]
