"""Real polynomials of degree at most three.

The denominator and numerator polynomials of a tetrahedron are cubics in the
parallel-vector parameter ``lam``.  This module provides evaluation on the
extended reals, closed-form real roots with Newton polishing, and removal of
roots shared by a numerator/denominator pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

EPS_DEG = 1e-10
EPS_ZERO = 1e-300
EPS_ROOT = 1e-8
EPS_RES = 1e-9

# Relative size of the discriminant terms below which roots are merged into
# a double/triple root.  Rounding alone leaves ~1e-15 here.
_EPS_MULTIPLE = 1e-13
_NEWTON_STEPS = 2


class ZeroPolynomial(ValueError):
    """Raised when an operation needs a polynomial that is not identically zero."""


class Root(NamedTuple):
    value: float
    multiplicity: int


RootList = tuple  # tuple[Root, ...], ascending by value


@dataclass(frozen=True)
class CubicPolynomial:
    """p(lam) = c3*lam**3 + c2*lam**2 + c1*lam + c0."""

    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0

    def __post_init__(self):
        coeffs = (float(self.c0), float(self.c1), float(self.c2), float(self.c3))
        if not all(map(math.isfinite, coeffs)):
            raise ValueError(f"non-finite coefficient in {coeffs}")
        for name, val in zip(("c0", "c1", "c2", "c3"), coeffs):
            object.__setattr__(self, name, val)
        # derived values are cached; eq/hash still only see the fields
        scale = max(map(abs, coeffs))
        deg = 0
        if scale >= EPS_ZERO:
            for k in (3, 2, 1):
                if abs(coeffs[k]) > EPS_DEG * scale:
                    deg = k
                    break
        object.__setattr__(self, "_coeffs", coeffs)
        object.__setattr__(self, "_scale", scale)
        object.__setattr__(self, "_degree", deg)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[float]) -> "CubicPolynomial":
        """Build from ascending coefficients (at most four)."""
        coeffs = [float(c) for c in coeffs]
        if len(coeffs) > 4:
            if any(c != 0.0 for c in coeffs[4:]):
                raise ValueError("degree above three")
            coeffs = coeffs[:4]
        return cls(*(coeffs + [0.0] * (4 - len(coeffs))))

    @classmethod
    def from_roots(cls, roots: Sequence[float], lead: float = 1.0) -> "CubicPolynomial":
        coeffs = [lead]
        for r in roots:
            coeffs = _mul_linear(coeffs, r)
        return cls.from_coeffs(coeffs)

    @property
    def coeffs(self) -> tuple[float, float, float, float]:
        return self._coeffs

    @property
    def scale(self) -> float:
        return self._scale

    def effective_degree(self) -> int:
        return self._degree

    def is_zero(self) -> bool:
        return self._scale < EPS_ZERO

    def leading(self) -> float:
        return self._coeffs[self._degree]

    def trimmed(self) -> list[float]:
        """Ascending coefficients up to the effective degree."""
        return list(self.coeffs[: self.effective_degree() + 1])

    def derivative(self) -> "CubicPolynomial":
        return CubicPolynomial(self.c1, 2.0 * self.c2, 3.0 * self.c3, 0.0)

    def __call__(self, lam: float) -> float:
        return evaluate(self, lam)

    def __add__(self, other: "CubicPolynomial") -> "CubicPolynomial":
        return CubicPolynomial(*(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "CubicPolynomial") -> "CubicPolynomial":
        return CubicPolynomial(*(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "CubicPolynomial":
        return CubicPolynomial(*(-a for a in self.coeffs))

    def __mul__(self, k: float) -> "CubicPolynomial":
        return CubicPolynomial(*(k * a for a in self.coeffs))

    __rmul__ = __mul__


def _horner(coeffs: Sequence[float], x: float) -> float:
    acc = 0.0
    for k in range(len(coeffs) - 1, -1, -1):
        acc = acc * x + coeffs[k]
    return acc


def _mul_linear(coeffs: list[float], r: float) -> list[float]:
    """Multiply ascending ``coeffs`` by (lam - r)."""
    out = [0.0] * (len(coeffs) + 1)
    for k, c in enumerate(coeffs):
        out[k + 1] += c
        out[k] -= r * c
    return out


def evaluate(p: CubicPolynomial, lam: float) -> float:
    """Evaluate ``p`` at a finite ``lam`` or at +/-inf.

    At infinity the sign of the leading effective coefficient decides the
    result; a constant polynomial evaluates to its value.
    """
    if math.isinf(lam):
        deg = p.effective_degree()
        lead = p.coeffs[deg]
        if deg == 0:
            return lead
        sign = math.copysign(1.0, lead)
        if lam < 0 and deg % 2 == 1:
            sign = -sign
        return sign * math.inf
    return _horner(p.coeffs, lam)


def _quadratic_monic(b: float, c: float) -> list[Root]:
    """Real roots of lam**2 + b*lam + c."""
    disc = b * b - 4.0 * c
    if abs(disc) <= _EPS_MULTIPLE * max(b * b, 4.0 * abs(c)):
        return [Root(-0.5 * b, 2)]
    if disc < 0.0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return [Root(0.0, 2)]
    return [Root(q, 1), Root(c / q, 1)]


def _cubic_monic(a: float, b: float, c: float) -> list[Root]:
    """Real roots of lam**3 + a*lam**2 + b*lam + c (trigonometric/Cardano)."""
    shift = a / 3.0
    q = (a * a - 3.0 * b) / 9.0
    r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0
    s = max(abs(a), math.sqrt(abs(b)), abs(c) ** (1.0 / 3.0))
    if s == 0.0:
        return [Root(0.0, 3)]
    if abs(q) <= _EPS_MULTIPLE * s * s and abs(r) <= _EPS_MULTIPLE * s ** 3:
        return [Root(-shift, 3)]
    q3 = q * q * q
    d = r * r - q3
    if abs(d) <= _EPS_MULTIPLE * s ** 6:
        sq = math.sqrt(max(q, 0.0))
        sq = math.copysign(sq, r)
        return [Root(-2.0 * sq - shift, 1), Root(sq - shift, 2)]
    if d < 0.0:
        sq = math.sqrt(q)
        theta = math.acos(max(-1.0, min(1.0, r / math.sqrt(q3))))
        return [
            Root(-2.0 * sq * math.cos((theta + 2.0 * math.pi * k) / 3.0) - shift, 1)
            for k in range(3)
        ]
    big = -math.copysign(abs(r) + math.sqrt(d), r)
    big = math.copysign(abs(big) ** (1.0 / 3.0), big)
    small = q / big if big != 0.0 else 0.0
    return [Root(big + small - shift, 1)]


def _polish(coeffs: list[float], root: Root) -> Root:
    """Newton steps on the (m-1)-th derivative; a step is kept only if it helps."""
    f = coeffs
    for _ in range(root.multiplicity - 1):
        f = [k * f[k] for k in range(1, len(f))]
    df = [k * f[k] for k in range(1, len(f))]
    x = root.value
    fx = _horner(f, x)
    for _ in range(_NEWTON_STEPS):
        if fx == 0.0:
            break
        dfx = _horner(df, x)
        if dfx == 0.0:
            break
        x_new = x - fx / dfx
        f_new = _horner(f, x_new)
        if not abs(f_new) < abs(fx):
            break
        x, fx = x_new, f_new
    return Root(x, root.multiplicity)


def _merge(roots: list[Root], eps_root: float) -> tuple:
    roots = sorted(roots)
    merged: list[Root] = []
    for root in roots:
        if merged and root.value - merged[-1].value <= eps_root * (1.0 + abs(root.value)):
            prev = merged[-1]
            m = prev.multiplicity + root.multiplicity
            value = (prev.value * prev.multiplicity + root.value * root.multiplicity) / m
            merged[-1] = Root(value, m)
        else:
            merged.append(root)
    return tuple(merged)


@lru_cache(maxsize=8192)
def real_roots(p: CubicPolynomial, eps_root: float = EPS_ROOT) -> tuple:
    """All real roots of ``p`` in ascending order, with multiplicities."""
    if p.is_zero():
        raise ZeroPolynomial("real_roots of the zero polynomial")
    coeffs = p.trimmed()
    deg = len(coeffs) - 1
    lead = coeffs[-1]
    if deg == 0:
        return ()
    if deg == 1:
        return (Root(-coeffs[0] / lead, 1),)
    if deg == 2:
        roots = _quadratic_monic(coeffs[1] / lead, coeffs[0] / lead)
    else:
        roots = _cubic_monic(coeffs[2] / lead, coeffs[1] / lead, coeffs[0] / lead)
    roots = [_polish(coeffs, r) for r in roots]
    return _merge(roots, eps_root)


def divide_linear(p: CubicPolynomial, r: float) -> CubicPolynomial:
    """Quotient of ``p`` by (lam - r) by synthetic division; the remainder is dropped."""
    coeffs = p.trimmed()
    deg = len(coeffs) - 1
    if deg == 0:
        return p
    out = [0.0] * deg
    acc = 0.0
    for k in range(deg, 0, -1):
        acc = coeffs[k] + r * acc
        out[k - 1] = acc
    return CubicPolynomial.from_coeffs(out)


def deflate_common_roots(
    p: CubicPolynomial, q: CubicPolynomial, eps_root: float = EPS_ROOT
) -> tuple[CubicPolynomial, CubicPolynomial, tuple]:
    """Divide out the real roots shared by ``p`` and ``q``.

    Returns the reduced pair and the shared roots (the denominator's values,
    with the shared multiplicity).
    """
    if p.is_zero() or q.is_zero():
        raise ZeroPolynomial("deflate_common_roots needs nonzero polynomials")
    p_roots = real_roots(p, eps_root)
    q_roots = real_roots(q, eps_root)
    if not p_roots or not q_roots:
        return p, q, ()
    shared = []
    for qr in q_roots:
        tol = eps_root * (1.0 + abs(qr.value))
        for pr in p_roots:
            if abs(pr.value - qr.value) <= tol:
                shared.append(Root(qr.value, min(pr.multiplicity, qr.multiplicity)))
                break
    for root in shared:
        for _ in range(root.multiplicity):
            p = divide_linear(p, root.value)
            q = divide_linear(q, root.value)
    return p, q, tuple(shared)
