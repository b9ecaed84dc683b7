"""Solution sets of rational inequalities on the projective line R u {inf}.

The two infinities are one point, so an interval may run through it, e.g.
``(10, -100)`` with ``contains_infinity``.  Sets are built from a partition of
the circle into points and open arcs between consecutive breakpoints:

    inf, (-inf, b0), b0, (b0, b1), b1, ..., b_{n-1}, (b_{n-1}, +inf)

Each element is marked in or out, and maximal runs become intervals, which
makes the representation canonical (adjacent pieces sharing a closed
endpoint are merged automatically).
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .polynomial import EPS_ROOT, CubicPolynomial, deflate_common_roots, real_roots

INF = math.inf


class ZeroDenominator(ValueError):
    pass


class Degenerate(ValueError):
    pass


@dataclass(frozen=True)
class LambdaInterval:
    """Arc from ``lo`` to ``hi`` in increasing direction, wrapping through inf.

    Endpoints are finite floats or ``inf`` (the point at infinity).  Special
    shapes: ``lo == hi`` closed is a single point, ``lo == hi`` open is the
    circle minus that point, and ``full`` is the whole circle.
    """

    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True
    full: bool = False

    @classmethod
    def whole(cls) -> "LambdaInterval":
        return cls(INF, INF, True, True, full=True)

    @property
    def contains_infinity(self) -> bool:
        if self.full:
            return True
        lo_inf, hi_inf = math.isinf(self.lo), math.isinf(self.hi)
        if lo_inf and hi_inf:
            return self.lo_closed
        if lo_inf:
            return self.lo_closed
        if hi_inf:
            return self.hi_closed
        return self.lo > self.hi or (self.lo == self.hi and not self.lo_closed)

    @property
    def is_point(self) -> bool:
        return not self.full and self.lo == self.hi and self.lo_closed and self.hi_closed

    def contains(self, lam: float) -> bool:
        if self.full:
            return True
        if math.isinf(lam):
            return self.contains_infinity
        lo, hi = self.lo, self.hi
        at_lo = lam == lo and self.lo_closed
        at_hi = lam == hi and self.hi_closed
        if math.isinf(lo) and math.isinf(hi):
            return not self.lo_closed
        if math.isinf(lo):
            return lam < hi or at_hi
        if math.isinf(hi):
            return lam > lo or at_lo
        if lo < hi:
            return lo < lam < hi or at_lo or at_hi
        if lo > hi:
            return lam > lo or lam < hi or at_lo or at_hi
        return at_lo if self.lo_closed else lam != lo

    __contains__ = contains

    def endpoints(self) -> list[float]:
        return [] if self.full else [self.lo, self.hi]

    def __str__(self) -> str:
        if self.full:
            return "R u {inf}"
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"


class _Partition:
    """Circle elements for a sorted list of distinct finite breakpoints."""

    def __init__(self, breaks: Sequence[float]):
        self.breaks = list(breaks)
        self.size = 2 * len(self.breaks) + 2

    def point_index(self, x: float) -> int:
        if math.isinf(x):
            return 0
        k = bisect_left(self.breaks, x)
        if k >= len(self.breaks) or self.breaks[k] != x:
            raise KeyError(x)
        return 2 * k + 2

    def element_value(self, idx: int) -> float:
        return INF if idx == 0 else self.breaks[(idx - 2) // 2]

    def arc_ends(self, idx: int) -> tuple[float, float]:
        k = (idx - 1) // 2
        left = self.breaks[k - 1] if k > 0 else INF
        right = self.breaks[k] if k < len(self.breaks) else INF
        return left, right

    def mark(self, interval: LambdaInterval, member: list[bool]) -> None:
        if interval.full:
            member[:] = [True] * self.size
            return
        i_lo = self.point_index(interval.lo)
        i_hi = self.point_index(interval.hi)
        start = i_lo if interval.lo_closed else i_lo + 1
        stop = i_hi if interval.hi_closed else i_hi - 1
        start %= self.size
        stop %= self.size
        if interval.lo == interval.hi and not interval.lo_closed:
            count = self.size - 1
        else:
            count = (stop - start) % self.size + 1
        for step in range(count):
            member[(start + step) % self.size] = True

    def to_intervals(self, member: Sequence[bool]) -> list[LambdaInterval]:
        if all(member):
            return [LambdaInterval.whole()]
        if not any(member):
            return []
        first_out = member.index(False)
        order = [(first_out + k) % self.size for k in range(self.size)]
        out = []
        run: list[int] = []
        for idx in order + [first_out]:
            if member[idx]:
                run.append(idx)
            elif run:
                out.append(self._run_interval(run[0], run[-1]))
                run = []
        return out

    def _run_interval(self, first: int, last: int) -> LambdaInterval:
        if first % 2 == 0:
            lo, lo_closed = self.element_value(first), True
        else:
            lo, lo_closed = self.arc_ends(first)[0], False
        if last % 2 == 0:
            hi, hi_closed = self.element_value(last), True
        else:
            hi, hi_closed = self.arc_ends(last)[1], False
        return LambdaInterval(lo, hi, lo_closed, hi_closed)


@dataclass(frozen=True)
class LambdaIntervalSet:
    intervals: tuple = field(default_factory=tuple)

    @classmethod
    def empty(cls) -> "LambdaIntervalSet":
        return cls(())

    @classmethod
    def whole(cls) -> "LambdaIntervalSet":
        return cls((LambdaInterval.whole(),))

    @classmethod
    def of(cls, intervals: Iterable[LambdaInterval]) -> "LambdaIntervalSet":
        """Canonical set from arbitrary (possibly overlapping) intervals."""
        intervals = list(intervals)
        part = _Partition(_breakpoints(intervals))
        member = [False] * part.size
        for iv in intervals:
            part.mark(iv, member)
        return cls(tuple(part.to_intervals(member)))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __getitem__(self, k) -> LambdaInterval:
        return self.intervals[k]

    def contains(self, lam: float) -> bool:
        return any(iv.contains(lam) for iv in self.intervals)

    __contains__ = contains

    @property
    def contains_infinity(self) -> bool:
        return any(iv.contains_infinity for iv in self.intervals)

    def __str__(self) -> str:
        return " u ".join(str(iv) for iv in self.intervals) or "{}"


def _breakpoints(intervals: Iterable[LambdaInterval]) -> list[float]:
    pts = {x for iv in intervals for x in iv.endpoints() if not math.isinf(x)}
    return sorted(pts)


def intersect(sets: Sequence[LambdaIntervalSet]) -> LambdaIntervalSet:
    """Intersection of canonical interval sets on the circle."""
    sets = list(sets)
    if not sets:
        return LambdaIntervalSet.whole()
    if any(not s for s in sets):
        return LambdaIntervalSet.empty()
    part = _Partition(_breakpoints(iv for s in sets for iv in s))
    member = [True] * part.size
    for s in sets:
        mine = [False] * part.size
        for iv in s:
            part.mark(iv, mine)
        member = [a and b for a, b in zip(member, mine)]
    return LambdaIntervalSet(tuple(part.to_intervals(member)))


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


class _SignChart:
    """Sign pattern of P/Q on the circle, read from roots and leading terms.

    The sign on an arc is ``sign(lead P) * sign(lead Q) * (-1)**m`` where
    ``m`` counts root multiplicities to the right of the arc, so no probe
    evaluation near a root can flip it.
    """

    __slots__ = ("p_vals", "q_vals", "mult", "sign", "at_inf")

    def __init__(self, P: CubicPolynomial, Q: CubicPolynomial, eps_root: float):
        if Q.is_zero():
            raise ZeroDenominator("denominator is the zero polynomial")
        q_roots = real_roots(Q, eps_root)
        dq = Q.effective_degree()
        self.mult: dict = {}
        for r in q_roots:
            self.mult[r.value] = self.mult.get(r.value, 0) + r.multiplicity
        self.q_vals = frozenset(self.mult)
        if P.is_zero():
            self.p_vals = frozenset()
            self.sign = 0
            self.at_inf = True
            return
        p_roots = real_roots(P, eps_root)
        for r in p_roots:
            self.mult[r.value] = self.mult.get(r.value, 0) + r.multiplicity
        self.p_vals = frozenset(r.value for r in p_roots)
        self.sign = _sign(P.leading()) * _sign(Q.leading())
        dp = P.effective_degree()
        self.at_inf = dp < dq or (dp == dq and self.sign > 0)

    def breaks(self):
        return self.mult.keys()

    def mark(self, breaks: Sequence[float], member: list[bool]) -> None:
        """AND this chart into ``member`` over the partition of ``breaks``."""
        member[0] = member[0] and self.at_inf
        n = len(breaks)
        right = 0
        for k in range(n, -1, -1):
            # arc k lies between breaks[k-1] and breaks[k]
            if k < n:
                right += self.mult.get(breaks[k], 0)
            arc_in = self.sign == 0 or (self.sign > 0) == (right % 2 == 0)
            member[2 * k + 1] = member[2 * k + 1] and arc_in
            if k < n:
                x = breaks[k]
                if x in self.q_vals:
                    point_in = False
                elif x in self.p_vals:
                    point_in = True
                else:
                    point_in = arc_in
                member[2 * k + 2] = member[2 * k + 2] and point_in


def _solve_charts(charts) -> LambdaIntervalSet:
    breaks = sorted({x for c in charts for x in c.breaks()})
    part = _Partition(breaks)
    member = [True] * part.size
    for c in charts:
        c.mark(breaks, member)
    return LambdaIntervalSet(tuple(part.to_intervals(member)))


def solve_inequality(P: CubicPolynomial, Q: CubicPolynomial,
                     eps_root: float = EPS_ROOT) -> LambdaIntervalSet:
    """Solution set of P(lam) / Q(lam) >= 0 on R u {inf}.

    Roots of Q are excluded (open endpoints), roots of P alone are included.
    At infinity the limit decides: included when deg P < deg Q (limit 0) or
    when the degrees agree and the leading ratio is positive.
    """
    return _solve_charts([_SignChart(P, Q, eps_root)])


def _deflated_chart(P, Q, eps_root) -> _SignChart:
    if not P.is_zero():
        P, Q, _ = deflate_common_roots(P, Q, eps_root)
    return _SignChart(P, Q, eps_root)


def solve_rational(P: CubicPolynomial, Q: CubicPolynomial,
                   eps_root: float = EPS_ROOT) -> LambdaIntervalSet:
    """``solve_inequality`` after removing the roots shared by P and Q."""
    return _solve_charts([_deflated_chart(P, Q, eps_root)])


def feasible_regions(tp, eps_root: float = EPS_ROOT) -> LambdaIntervalSet:
    """Parameters for which all four barycentric coordinates lie in [0, 1].

    Intersects the solutions of P_i/Q >= 0 and (Q - P_i)/Q >= 0 for the four
    numerators on one common partition of the circle; each resulting
    interval is one branch of the curve inside the tetrahedron.
    """
    from .eigensystem import Degeneracy

    if tp.degenerate_flag is not Degeneracy.NONE:
        raise Degenerate(f"cell is degenerate: {tp.degenerate_flag.value}")
    Q = tp.Q
    charts = []
    for P in tp.P:
        charts.append(_deflated_chart(P, Q, eps_root))
        charts.append(_deflated_chart(Q - P, Q, eps_root))
    return _solve_charts(charts)
