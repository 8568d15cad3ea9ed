"""Adaptive hyperbolic kernels on the Poincare ball.

Curvature-aware de Branges-Rovnyak kernels with learnable multiplier
parameters, the derived adaptive kernel family (AHL, AHPoly, AHRBF,
AHLap, AHRad), validation suites and desk-scale training harnesses.
"""

from .geometry import (
    BallPoint,
    Curvature,
    TangentVector,
    clip_project,
    conformal_factor,
    exp0,
    geodesic_distance,
    mobius_decompose,
    mobius_map,
    pseudo_distance,
)
from .kernels import GramMatrix, KernelConfig, RadialCoeffs, ahrad, base_kernel, evaluate, gram
from .rkhs import (
    MultiplierParams,
    da_kernel,
    dbr_kernel,
    multiplier_b,
    pointwise_contraction_check,
    rkhs_distance_sq,
)

__all__ = [
    "BallPoint",
    "Curvature",
    "TangentVector",
    "GramMatrix",
    "KernelConfig",
    "MultiplierParams",
    "RadialCoeffs",
    "ahrad",
    "base_kernel",
    "clip_project",
    "conformal_factor",
    "da_kernel",
    "dbr_kernel",
    "evaluate",
    "exp0",
    "geodesic_distance",
    "gram",
    "mobius_decompose",
    "mobius_map",
    "multiplier_b",
    "pointwise_contraction_check",
    "pseudo_distance",
    "rkhs_distance_sq",
]

__version__ = "0.1.0"
