"""Elements of SL(2,R) and the one-parameter subgroups used throughout."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError

DET_TOL = 1e-12


@dataclass(frozen=True)
class GroupElement:
    """A real 2x2 matrix ``[[a, b], [c, d]]`` of determinant one."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if type(det) is Fraction or type(det) is int:
            if det != 1:
                raise ValueError(f"determinant {det} is not 1")
            return
        if abs(det - 1) > DET_TOL * max(1.0, abs(self.a * self.d), abs(self.b * self.c)):
            raise ValueError(f"determinant {float(det)!r} is not 1")

    @classmethod
    def _unchecked(cls, a, b, c, d) -> "GroupElement":
        """Skip the determinant check for entries known to satisfy it."""
        g = object.__new__(cls)
        for k, v in zip("abcd", (a, b, c, d)):
            object.__setattr__(g, k, v)
        return g

    @classmethod
    def from_matrix(cls, m) -> "GroupElement":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def act(self, x, y):
        return self.a * x + self.b * y, self.c * x + self.d * y

    def norm(self) -> float:
        """Operator 2-norm (largest singular value)."""
        f = self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2
        return math.sqrt((f + math.sqrt(max(f * f - 4.0, 0.0))) / 2.0)

    def distance(self, other: "GroupElement") -> float:
        return float(np.max(np.abs(self.matrix() - other.matrix())))


IDENTITY = GroupElement(1.0, 0.0, 0.0, 1.0)


def geodesic(t: float) -> GroupElement:
    """``diag(e^t, e^-t)``, the Teichmueller geodesic flow at time ``t``."""
    return GroupElement(math.exp(t), 0.0, 0.0, math.exp(-t))


def rotation(theta: float) -> GroupElement:
    """``[[cos, sin], [-sin, cos]]``, rotating the surface by ``theta``."""
    c, s = math.cos(theta), math.sin(theta)
    return GroupElement(c, s, -s, c)


def upper_unipotent(alpha: float) -> GroupElement:
    return GroupElement(1.0, alpha, 0.0, 1.0)


def lower_unipotent(alpha: float) -> GroupElement:
    return GroupElement(1.0, 0.0, alpha, 1.0)


def cos_diagonal(xi: float) -> GroupElement:
    """``diag(cos xi, 1/cos xi)``."""
    c = math.cos(xi)
    return GroupElement(c, 0.0, 0.0, 1.0 / c)


def decomposition_identity(xi: float):
    """Factor the rotation by ``xi`` as lower-unipotent * diagonal * upper-unipotent.

    Returns ``(lower, diagonal, upper, residual)`` where ``residual`` is the
    max-entry distance between the product and ``rotation(xi)``.

    Factor entries are exact fractions built from the rational point
    ``((1 - u^2), 2u) / (1 + u^2)`` of the circle, ``u = tan(xi / 2)``, so the
    product is an exact rotation. Float factors cannot do this near pi/2:
    the lower-right entry cancels ``tan(xi)^2 cos(xi)`` against ``1/cos(xi)``
    and loses about ``eps / cos(xi)``.
    """
    if not 0.0 < xi < math.pi / 2:
        raise DomainError(f"xi={xi!r} must lie in (0, pi/2)")
    p, q = math.tan(xi / 2).as_integer_ratio()
    n, d, s = q * q - p * p, q * q + p * p, 2 * p * q
    # unit determinant holds by construction for all three
    lower = GroupElement._unchecked(1, 0, Fraction(-s, n), 1)
    diag = GroupElement._unchecked(Fraction(n, d), 0, 0, Fraction(d, n))
    upper = GroupElement._unchecked(1, Fraction(s, n), 0, 1)
    # the same product on integer numerators over the common denominator n^3 d:
    # [[n, 0], [-s, n]] [[n^2, 0], [0, d^2]] [[n, s], [0, n]]
    ld = (n * n * n, 0, -s * n * n, n * d * d)
    num = (ld[0] * n, ld[0] * s, ld[2] * n, ld[2] * s + ld[3] * n)
    den = n * d * n * n
    r = rotation(xi)
    residual = 0.0
    for x, y in zip(num, (r.a, r.b, r.c, r.d)):
        yp, yq = y.as_integer_ratio()
        residual = max(residual, abs(x * yq - yp * den) / (den * yq))
    return lower, diag, upper, residual


def conjugated_rotation_factors(t: float, xi: float):
    """Factors of ``g_t r_xi`` as ``lower(-e^{-2t} tan xi) * a_xi * upper(e^{2t} tan xi) * g_t``."""
    tan = math.tan(xi)
    return (
        lower_unipotent(-math.exp(-2 * t) * tan),
        cos_diagonal(xi),
        upper_unipotent(math.exp(2 * t) * tan),
        geodesic(t),
    )


def kak(g: GroupElement):
    """Polar (KAK) decomposition ``g = r(phi1) diag(e^s, e^-s) r(phi2)`` with ``s >= 0``."""
    u, sv, vt = np.linalg.svd(g.matrix())
    if np.linalg.det(u) < 0:
        u[:, 1] *= -1
        vt[1, :] *= -1
    s = math.log(sv[0])
    # rotation(phi) = [[cos, sin], [-sin, cos]]
    phi1 = math.atan2(u[0, 1], u[0, 0])
    phi2 = math.atan2(vt[0, 1], vt[0, 0])
    return phi1, s, phi2
