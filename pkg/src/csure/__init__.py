"""James-Stein shrinkage on the complex plane viewed as P1 x SO(2)."""
from ._backend import BACKEND
from .manifold import AngleSO2, LogCoord, PolarComplex, ScaleP1, dist_c, exp_map, log_map

__version__ = "0.1.0"

__all__ = ["BACKEND", "AngleSO2", "LogCoord", "PolarComplex", "ScaleP1", "dist_c", "exp_map", "log_map"]
