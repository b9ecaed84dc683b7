import math

import numpy as np
import pytest

from pvcurves.eigensystem import tet_polynomials
from pvcurves.intervals import (
    Degenerate,
    LambdaInterval,
    LambdaIntervalSet,
    ZeroDenominator,
    feasible_regions,
    intersect,
    solve_inequality,
    solve_rational,
)
from pvcurves.oracle import brute_force_inequality, pointwise_mu
from pvcurves.polynomial import CubicPolynomial, real_roots

from .cases import CONFIGURATIONS, UNIT_TET

INF = math.inf


def iv(lo, hi, lo_closed=True, hi_closed=True):
    return LambdaInterval(lo, hi, lo_closed, hi_closed)


def test_worked_example():
    P = CubicPolynomial.from_roots([-20, -10, 0.1])
    Q = CubicPolynomial.from_roots([-100, -0.3, 10])
    got = solve_inequality(P, Q)
    assert len(got) == 3
    a, b, c = got
    assert (a.lo_closed, a.hi_closed, b.lo_closed, b.hi_closed) == (True, True, False, True)
    assert (a.lo, a.hi) == pytest.approx((-20, -10), abs=1e-9)
    assert (b.lo, b.hi) == pytest.approx((-0.3, 0.1), abs=1e-9)
    # the two unbounded pieces form one arc through infinity
    assert c.contains_infinity and not c.lo_closed and not c.hi_closed
    assert (c.lo, c.hi) == pytest.approx((10, -100), abs=1e-9)


def test_worked_example_against_sampling():
    P = CubicPolynomial.from_roots([-20, -10, 0.1])
    Q = CubicPolynomial.from_roots([-100, -0.3, 10])
    got = solve_inequality(P, Q)
    lams = np.linspace(-300, 300, 200001)
    roots = np.array([-100, -20, -10, -0.3, 0.1, 10])
    far = np.min(np.abs(lams[:, None] - roots[None]), axis=1) > 1e-6
    ref = brute_force_inequality(P.coeffs, Q.coeffs, lams[far])
    mine = np.array([got.contains(x) for x in lams[far]])
    assert np.array_equal(mine, ref)
    # the disputed point: -5 lies between -10 and -0.3 and is not a solution
    assert not got.contains(-5.0)


def test_constant_ratios():
    assert solve_inequality(CubicPolynomial(1.0), CubicPolynomial(1.0)) == LambdaIntervalSet.whole()
    assert not solve_inequality(CubicPolynomial(-1.0), CubicPolynomial(1.0))


def test_zero_denominator():
    with pytest.raises(ZeroDenominator):
        solve_inequality(CubicPolynomial(1.0), CubicPolynomial())


def test_zero_numerator_is_everything_but_poles():
    got = solve_inequality(CubicPolynomial(), CubicPolynomial(-2.0, 1.0))
    assert len(got) == 1 and got[0].lo == 2.0 == got[0].hi and not got[0].lo_closed
    assert not got.contains(2.0) and got.contains(INF) and got.contains(1.9)


def test_limit_at_infinity():
    # (1 - lam) / -1 >= 0  <=>  lam >= 1, and inf belongs since deg P > deg Q? no: excluded
    got = solve_inequality(CubicPolynomial(1.0, -1.0), CubicPolynomial(-1.0))
    assert str(got) == "[1, inf)"
    assert not got.contains_infinity
    # equal degrees with positive leading ratio include infinity
    got = solve_inequality(CubicPolynomial(-1.0, 1.0), CubicPolynomial(-2.0, 1.0))
    assert got.contains_infinity and got.contains(1.0) and not got.contains(1.5)


def test_intersect_overlap():
    got = intersect([LambdaIntervalSet.of([iv(0, 1)]), LambdaIntervalSet.of([iv(0.5, 2)])])
    assert list(got) == [iv(0.5, 1)]


def test_intersect_through_infinity():
    around = LambdaIntervalSet.of([iv(1, 0, False, False)])
    assert around.contains_infinity
    got = intersect([around, LambdaIntervalSet.of([iv(-5, 5)])])
    assert list(got) == [iv(-5, 0, True, False), iv(1, 5, False, True)]


def test_adjacent_closed_pieces_merge():
    got = LambdaIntervalSet.of([iv(0, 1), iv(1, 2, True, False)])
    assert list(got) == [iv(0, 2, True, False)]


def test_intersect_matches_membership_sampling():
    rng = np.random.default_rng(0)
    probes = np.concatenate([rng.normal(scale=5, size=10000), [INF]])
    for _ in range(40):
        sets = []
        for _ in range(3):
            pieces = []
            for _ in range(rng.integers(1, 4)):
                lo, hi = rng.normal(scale=5, size=2)
                pieces.append(iv(lo, hi, bool(rng.integers(2)), bool(rng.integers(2))))
            sets.append(LambdaIntervalSet.of(pieces))
        got = intersect(sets)
        for x in probes:
            assert got.contains(x) == all(s.contains(x) for s in sets)


def test_random_pairs_against_sign_evaluation():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        P = CubicPolynomial(*rng.normal(size=4))
        Q = CubicPolynomial(*rng.normal(size=4))
        got = solve_inequality(P, Q)
        roots = np.array([r.value for r in real_roots(P) + real_roots(Q)])
        lams = rng.normal(scale=3, size=100)
        if len(roots):
            lams = lams[np.min(np.abs(lams[:, None] - roots[None]), axis=1) > 1e-6]
        ref = brute_force_inequality(P.coeffs, Q.coeffs, lams)
        assert [got.contains(x) for x in lams] == list(ref)


def test_endpoint_openness():
    rng = np.random.default_rng(2)
    for _ in range(2000):
        P = CubicPolynomial(*rng.normal(size=4))
        Q = CubicPolynomial(*rng.normal(size=4))
        q_roots = [r.value for r in real_roots(Q)]
        p_roots = [r.value for r in real_roots(P)]
        for piece in solve_inequality(P, Q):
            for x, closed in ((piece.lo, piece.lo_closed), (piece.hi, piece.hi_closed)):
                if math.isinf(x) or piece.full:
                    continue
                pool = p_roots if closed else q_roots
                assert min(abs(x - r) for r in pool) <= 1e-8 * (1 + abs(x))


def test_solve_rational_removes_shared_root():
    P = CubicPolynomial.from_roots([1.0, 3.0])
    Q = CubicPolynomial.from_roots([1.0, -2.0])
    got = solve_rational(P, Q)
    # behaves like (lam - 3)/(lam + 2) with the common factor cancelled
    assert got == solve_inequality(CubicPolynomial.from_roots([3.0]), CubicPolynomial.from_roots([-2.0]))
    assert not got.contains(-2.0) and got.contains(3.0) and not got.contains(1.0)


def test_z_axis_region():
    w = np.tile([0.0, 0.0, 1.0], (4, 1))
    got = feasible_regions(tet_polynomials(UNIT_TET, w))
    assert list(got) == [iv(0.0, 1.0)]


def test_degenerate_rejected():
    with pytest.raises(Degenerate):
        feasible_regions(tet_polynomials(np.zeros((4, 3)), np.zeros((4, 3))))


@pytest.mark.parametrize("name", sorted(CONFIGURATIONS))
def test_configurations(name):
    case = CONFIGURATIONS[name]
    regions = feasible_regions(tet_polynomials(case["v"], case["w"]))
    assert len(regions) == case["branches"]
    assert [r.contains_infinity for r in regions] == case["w_critical"]
    assert [r.contains(0.0) for r in regions] == case["v_critical"]


def test_infinity_limit_is_a_zero_of_w():
    rng = np.random.default_rng(3)
    seen = 0
    for _ in range(3000):
        v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        tp = tet_polynomials(v, w)
        if not feasible_regions(tp).contains_infinity:
            continue
        seen += 1
        lead = tp.Q.c3
        mu = np.array([p.c3 / lead for p in tp.P])
        assert np.linalg.norm(mu @ w) <= 1e-7 * np.max(np.linalg.norm(w, axis=1))
    assert seen > 10


def test_swap_maps_lambda_to_reciprocal():
    rng = np.random.default_rng(4)
    for _ in range(300):
        v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        fwd = feasible_regions(tet_polynomials(v, w))
        back = feasible_regions(tet_polynomials(w, v))
        assert len(fwd) == len(back)
        for piece in fwd:
            lo, hi = piece.lo, piece.hi
            if piece.full or math.isinf(lo) or math.isinf(hi):
                continue
            span = hi - lo if hi > lo else None
            if span is None:
                continue
            for lam in np.linspace(lo, hi, 7)[1:-1]:
                if lam == 0.0:
                    continue
                assert back.contains(1.0 / lam)
                assert np.allclose(pointwise_mu(v, w, lam), pointwise_mu(w, v, 1.0 / lam), atol=1e-9)
