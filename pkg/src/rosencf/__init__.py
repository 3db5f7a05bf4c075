"""Rosen continued fractions over Hecke groups with exact Z[lambda_k] arithmetic."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .cf import Expansion, Family, alpha_family, expand, regular, rosen, theta_series
from .hecke import EnumConfig, compute_t0, count_solutions, enumerate_points
from .lab import ConstantsTarget, entropy_estimate, legendre_scan, lenstra_breakpoint, theta_cdf
from .moebius import MoebiusMatrix, ParabolicPoint
from .ring import LambdaInt, LambdaRing, make_ring

__all__ = [
    "ConstantsTarget", "EnumConfig", "Expansion", "Family", "LambdaInt", "LambdaRing", "MoebiusMatrix",
    "ParabolicPoint", "alpha_family", "compute_t0", "count_solutions", "entropy_estimate", "enumerate_points",
    "expand", "legendre_scan", "lenstra_breakpoint", "make_ring", "regular", "rosen", "theta_cdf", "theta_series",
]
