"""Exact algebra of the rotation-extended plane.

The group is the semidirect product of the complex plane with the circle:
elements are pairs (z, theta) multiplied by

    (z2, theta2) * (z1, theta1) = (z2 + e^{i theta2} z1, theta2 + theta1).

The rotation coordinate is composed by angle addition rather than by
multiplying unit complex numbers, so long products cannot drift off the
unit circle.  Angles may carry an exact representation as a rational
multiple of a full turn, which keeps rational-angle runs exact: whether an
angle is a rational multiple of 2*pi cannot be decided from a float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


class CocycleDataError(LookupError):
    """The increment sequence does not cover the requested index window."""


def _canonical(value: float) -> float:
    v = math.fmod(value, TWO_PI)
    if v < 0.0:
        v += TWO_PI
    if v >= TWO_PI:  # fmod of a tiny negative can round up to exactly 2*pi
        v -= TWO_PI
    return v


class Angle:
    """An angle in radians, canonicalized into [0, 2*pi).

    ``Angle.rational(p, q)`` builds the exact angle 2*pi*p/q; exactness
    survives addition, negation and integer multiples but is dropped as
    soon as a plain float angle enters the arithmetic.
    """

    __slots__ = ("value", "p", "q")

    def __init__(self, radians: float, _p: int | None = None, _q: int | None = None):
        v = float(radians)
        if not math.isfinite(v):
            raise ValueError(f"angle must be finite, got {radians!r}")
        self.value = _canonical(v)
        self.p = _p
        self.q = _q

    @classmethod
    def rational(cls, p: int, q: int) -> "Angle":
        """The exact angle 2*pi*p/q, reduced so that gcd(p, q) = 1 and 0 <= p < q."""
        p, q = int(p), int(q)
        if q == 0:
            raise ValueError("denominator q must be nonzero")
        if q < 0:
            p, q = -p, -q
        p %= q
        g = math.gcd(p, q)
        p //= g
        q //= g
        return cls(TWO_PI * p / q, _p=p, _q=q)

    @property
    def is_rational(self) -> bool:
        return self.q is not None

    def __add__(self, other: "Angle") -> "Angle":
        if not isinstance(other, Angle):
            return NotImplemented
        if self.is_rational and other.is_rational:
            return Angle.rational(self.p * other.q + other.p * self.q, self.q * other.q)
        return Angle(self.value + other.value)

    def __neg__(self) -> "Angle":
        if self.is_rational:
            return Angle.rational(-self.p, self.q)
        return Angle(-self.value)

    def times(self, n: int) -> "Angle":
        """The angle n*self, exact for rational angles (integer arithmetic)."""
        if self.is_rational:
            return Angle.rational(n * self.p, self.q)
        return Angle(n * self.value)

    def __eq__(self, other) -> bool:
        return isinstance(other, Angle) and self.value == other.value

    def __hash__(self) -> int:
        return hash(self.value)

    def __repr__(self) -> str:
        if self.is_rational:
            return f"Angle.rational({self.p}, {self.q})"
        return f"Angle({self.value!r})"


def as_angle(beta) -> Angle:
    return beta if isinstance(beta, Angle) else Angle(float(beta))


def unit(theta: Angle) -> complex:
    """e^{i theta} as a complex number."""
    return complex(math.cos(theta.value), math.sin(theta.value))


@dataclass(frozen=True)
class GroupElement:
    """A group element (z, theta): displacement z in C, rotation theta."""

    z: complex
    theta: Angle

    def __post_init__(self):
        zc = complex(self.z)
        if not (math.isfinite(zc.real) and math.isfinite(zc.imag)):
            raise ValueError(f"displacement must be finite, got {self.z!r}")
        object.__setattr__(self, "z", zc)
        object.__setattr__(self, "theta", as_angle(self.theta))


def identity() -> GroupElement:
    return GroupElement(0j, Angle(0.0))


def g_mul(a: GroupElement, b: GroupElement) -> GroupElement:
    """Group product a * b = (a.z + e^{i a.theta} b.z, a.theta + b.theta)."""
    return GroupElement(a.z + unit(a.theta) * b.z, a.theta + b.theta)


def g_inv(a: GroupElement) -> GroupElement:
    """Inverse (-e^{-i theta} z, -theta); g_mul(a, g_inv(a)) is the identity."""
    nt = -a.theta
    return GroupElement(-unit(nt) * a.z, nt)


def scale(eta: float, a: GroupElement) -> GroupElement:
    """Scaling automorphism (z, theta) -> (eta z, theta); requires eta > 0.

    A one-parameter group: scale(e1, scale(e2, g)) == scale(e1*e2, g), and a
    homomorphism for the product.  On the plane it multiplies area by eta^2.
    """
    if not (eta > 0.0):
        raise ValueError(f"scaling parameter must be positive, got {eta!r}")
    return GroupElement(eta * a.z, a.theta)


def proj_c(a: GroupElement) -> complex:
    """Projection onto the displacement coordinate."""
    return a.z


def cocycle(f_seq, n: int, start: int = 0) -> GroupElement:
    """Partial product of an increment sequence treated as a cocycle.

    For n > 0 returns f[start+n-1] * ... * f[start+1] * f[start]; for n = 0
    the identity; for n < 0 the inverse of the product over the shifted
    window [start+n, start).  With ``start=m`` this is the cocycle evaluated
    along the orbit shifted by m, so the cocycle identity reads

        cocycle(f, n + m) == g_mul(cocycle(f, n, start=m), cocycle(f, m))

    ``f_seq`` must support ``f_seq[k]`` for every index in the window; a
    missing index raises :class:`CocycleDataError`.  Windows with negative
    indices need a mapping (list/tuple indices would silently wrap).
    """
    n = int(n)
    if n == 0:
        return identity()
    lo, hi = (start, start + n) if n > 0 else (start + n, start)
    acc = identity()
    for k in range(lo, hi):
        if k < 0 and isinstance(f_seq, (list, tuple)):
            raise CocycleDataError(
                f"index {k} is negative; use a mapping for two-sided sequences"
            )
        try:
            fk = f_seq[k]
        except (IndexError, KeyError) as exc:
            raise CocycleDataError(f"increment sequence has no element at index {k}") from exc
        acc = g_mul(fk, acc)
    return acc if n > 0 else g_inv(acc)


def contraction_threshold(elements, eps: float) -> float:
    """Largest eta0 such that |proj_c(scale(eta, g))| < eps for all eta < eta0.

    Witnesses the contraction of the scaling automorphisms toward the
    rotation subgroup on any bounded set of elements.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    m = max((abs(g.z) for g in elements), default=0.0)
    return math.inf if m == 0.0 else eps / m
