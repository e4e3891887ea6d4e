"""Effective Hamiltonians of 1/2|p|^2 + V on the 2-torus and the geometry of their flat set."""

from .errors import HbarGeoError
from .potential import PotentialSpec

__version__ = "0.1.0"
__all__ = ["HbarGeoError", "PotentialSpec", "__version__"]
