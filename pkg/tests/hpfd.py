"""High-precision scalar for finite-difference gradient oracles.

`HPScalar` wraps an mpmath multiprecision float behind the same method
surface the tape scalar exposes (exp/log/tanh/sqrt plus arithmetic), so
the shared generic loss code evaluates losses far below float64 noise.
Central differences taken at high precision are exact enough to resolve
coordinates whose true derivative is zero (e.g. directions the softmax
normalization cancels), where float64 differences only produce rounding
residue.
"""

from __future__ import annotations

import mpmath

mpmath.mp.dps = 60


class HPScalar:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v.v if isinstance(v, HPScalar) else mpmath.mpf(v)

    def __float__(self):
        return float(self.v)

    def __repr__(self):
        return f"HPScalar({self.v})"

    @staticmethod
    def _val(other):
        return other.v if isinstance(other, HPScalar) else mpmath.mpf(other)

    def __add__(self, other):
        return HPScalar(self.v + self._val(other))

    __radd__ = __add__

    def __sub__(self, other):
        return HPScalar(self.v - self._val(other))

    def __rsub__(self, other):
        return HPScalar(self._val(other) - self.v)

    def __mul__(self, other):
        return HPScalar(self.v * self._val(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return HPScalar(self.v / self._val(other))

    def __rtruediv__(self, other):
        return HPScalar(self._val(other) / self.v)

    def __neg__(self):
        return HPScalar(-self.v)

    def __pow__(self, e):
        return HPScalar(self.v ** self._val(e))

    def exp(self):
        return HPScalar(mpmath.exp(self.v))

    def log(self):
        return HPScalar(mpmath.log(self.v))

    def tanh(self):
        return HPScalar(mpmath.tanh(self.v))

    def sqrt(self):
        return HPScalar(mpmath.sqrt(self.v))


def hp_central_diff(f, x: float, h: float = 1e-5) -> float:
    """Central difference of a scalar-in/scalar-out map at high precision.

    `f` must accept an HPScalar and return an HPScalar (or float for a
    constant branch); the difference quotient is formed in multiprecision
    and only the final result is rounded to float64.
    """
    hh = mpmath.mpf(h)
    x0 = mpmath.mpf(x)
    up = f(HPScalar(x0 + hh))
    dn = f(HPScalar(x0 - hh))
    up = up.v if isinstance(up, HPScalar) else mpmath.mpf(up)
    dn = dn.v if isinstance(dn, HPScalar) else mpmath.mpf(dn)
    return float((up - dn) / (2 * hh))
