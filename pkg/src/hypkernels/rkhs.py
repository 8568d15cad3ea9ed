"""Curvature-aware Drury-Arveson and de Branges-Rovnyak kernels.

The multiplier b is a convex combination of symmetrized Mobius
self-mappings with learnable poles; it keeps the induced kernel positive
definite for any number of poles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    BallPoint,
    Curvature,
    _interior_point,
    check_compatible,
    hdot,
)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.asarray(logits, dtype=np.float64)
    shifted = shifted - shifted.max()
    e = np.exp(shifted)
    return e / e.sum()


@dataclass(frozen=True)
class MultiplierParams:
    """Learnable poles in the ball plus weight logits mapped to the simplex."""

    poles: tuple
    weight_logits: np.ndarray

    def __post_init__(self):
        poles = tuple(self.poles)
        if len(poles) < 1:
            raise ValueError("at least one pole is required")
        for p in poles[1:]:
            check_compatible(poles[0], p)
        logits = np.asarray(self.weight_logits, dtype=np.float64)
        if logits.shape != (len(poles),):
            raise ValueError(
                f"expected {len(poles)} weight logits, got shape {logits.shape}"
            )
        if not np.all(np.isfinite(logits)):
            raise ValueError("weight logits must be finite")
        logits = logits.copy()
        logits.flags.writeable = False
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "weight_logits", logits)

    @property
    def m(self) -> int:
        return len(self.poles)

    @property
    def dim(self) -> int:
        return self.poles[0].dim

    @property
    def curvature(self) -> Curvature:
        return self.poles[0].curvature

    @property
    def weights(self) -> np.ndarray:
        """Softmax view of the logits: strictly positive, sums to one."""
        return softmax(self.weight_logits)

    def check_point(self, z: BallPoint) -> None:
        check_compatible(self.poles[0], z)


def da_kernel(z_i: BallPoint, z_j: BallPoint) -> complex:
    """Drury-Arveson kernel 1/(1 - c * z_i* z_j)."""
    check_compatible(z_i, z_j)
    c = z_i.curvature.c
    return 1.0 / (1.0 - c * hdot(z_i.coords, z_j.coords))


def _b_term(a: BallPoint, z: BallPoint) -> np.ndarray:
    # Single-pole term [(c a*z)a - P_a(z) - s_a Q_a(z)] / (1 - (c a*z)^2),
    # written as s*[c(a*z)a/(1+s) - z]/(1 - (c a*z)^2) which is smooth at
    # a = 0 (where it reduces to -z).
    c = a.curvature.c
    az = hdot(a.coords, z.coords)
    caz = c * az
    s = np.sqrt(1.0 - c * a.norm**2)
    num = s * ((caz / (1.0 + s)) * a.coords - z.coords)
    return num / (1.0 - caz * caz)


def multiplier_b(params: MultiplierParams, z: BallPoint) -> BallPoint:
    """b(z) = 1/2 sum_i w_i (phi_{a_i}(z) + phi_{-a_i}(z)), in closed form.

    The output is a convex combination of ball points, hence strictly
    inside the ball; b(0) = 0 and b(-z) = -b(z).
    """
    params.check_point(z)
    out = np.zeros(z.dim, dtype=np.complex128)
    for w, a in zip(params.weights, params.poles):
        out += w * _b_term(a, z)
    return _interior_point(out, z.curvature)


def dbr_kernel(params: MultiplierParams, z_i: BallPoint, z_j: BallPoint) -> complex:
    """Curvature-aware de Branges-Rovnyak kernel.

    k_c^b(z_i, z_j) = (1 - c * b(z_i)* b(z_j)) / (1 - c * z_i* z_j).
    Diagonal values are real and strictly positive.
    """
    check_compatible(z_i, z_j)
    params.check_point(z_i)
    c = z_i.curvature.c
    b_i = multiplier_b(params, z_i)
    b_j = multiplier_b(params, z_j)
    num = 1.0 - c * hdot(b_i.coords, b_j.coords)
    den = 1.0 - c * hdot(z_i.coords, z_j.coords)
    return num / den


def rkhs_distance_sq(
    params: MultiplierParams, z_i: BallPoint, z_j: BallPoint
) -> float:
    """Squared RKHS distance between representers.

    ||k^_{z_i} - k^_{z_j}||^2 = k(z_i,z_i) + k(z_j,z_j) - 2 Re k(z_i,z_j),
    with tiny negative rounding residues clamped to zero.
    """
    val = (
        dbr_kernel(params, z_i, z_i).real
        + dbr_kernel(params, z_j, z_j).real
        - 2.0 * dbr_kernel(params, z_i, z_j).real
    )
    if val < 0.0:
        if val < -1e-12:
            raise ArithmeticError(f"squared distance {val} below rounding tolerance")
        return 0.0
    return float(val)


def pointwise_contraction_check(params: MultiplierParams, z: BallPoint) -> bool:
    """Pointwise necessary condition sqrt(c)*||b(z)|| < 1 for the multiplier bound."""
    b = multiplier_b(params, z)
    return bool(np.sqrt(z.curvature.c) * b.norm < 1.0)
