"""High-order transfer maps (HOTM) for perturbed Keplerian orbits."""
from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
