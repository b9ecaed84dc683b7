import numpy as np
import pytest
import scipy.linalg

from pvcurves.eigensystem import (
    Degeneracy,
    DegenerateFace,
    NonFiniteInput,
    adjugate_coeffs,
    build_system,
    denominator,
    numerators,
    solve_face_points,
    tet_polynomials,
    triangle_characteristic,
)
from pvcurves.oracle import normalized_residual, pencil_determinant, pointwise_mu
from pvcurves.polynomial import real_roots

from .cases import UNIT_TET


def test_build_system_zero_fields():
    sys = build_system(np.zeros((4, 3)), np.zeros((4, 3)))
    for m in (sys.A, sys.B, sys.a, sys.b):
        assert not np.any(m)


def test_build_system_position_field():
    w = np.tile([0.0, 0.0, 1.0], (4, 1))
    sys = build_system(UNIT_TET, w)
    assert np.array_equal(sys.A, (UNIT_TET[:3] - UNIT_TET[3]).T)
    assert not np.any(sys.B)
    assert np.array_equal(sys.a, [0, 0, 1]) and np.array_equal(sys.b, [0, 0, 1])


def test_build_system_reproduces_interpolant():
    rng = np.random.default_rng(0)
    v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    sys = build_system(v, w)
    for _ in range(100):
        mu = rng.dirichlet(np.ones(4))
        assert np.allclose(sys.A @ mu[:3] + sys.a, mu @ v, atol=1e-12)
        assert np.allclose(sys.B @ mu[:3] + sys.b, mu @ w, atol=1e-12)


def test_build_system_rejects_nan():
    v = np.zeros((4, 3))
    v[2, 1] = np.nan
    with pytest.raises(NonFiniteInput):
        build_system(v, np.zeros((4, 3)))


def test_denominator_constant_when_b_zero():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(4, 3))
    w = np.tile(rng.normal(size=3), (4, 1))
    sys = build_system(v, w)
    q = denominator(sys)
    assert q.effective_degree() == 0
    assert q.c0 == pytest.approx(np.linalg.det(sys.A), rel=1e-12)


def test_denominator_identical_fields():
    rng = np.random.default_rng(2)
    v = rng.normal(size=(4, 3))
    sys = build_system(v, v)
    q = denominator(sys)
    d = np.linalg.det(sys.A)
    assert np.allclose(q.coeffs, [d, -3 * d, 3 * d, -d], rtol=1e-12, atol=1e-14)
    roots = real_roots(q)
    assert len(roots) == 1 and roots[0].multiplicity == 3
    assert roots[0].value == pytest.approx(1.0, abs=1e-10)


def test_denominator_matches_lu_determinant():
    rng = np.random.default_rng(3)
    for _ in range(200):
        sys = build_system(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)))
        q = denominator(sys)
        for lam in (-2, -1, 0, 1, 2):
            ref = scipy.linalg.det(sys.A - lam * sys.B)
            assert abs(q(lam) - ref) <= 1e-10 * max(1.0, abs(ref), q.scale * 8)


def test_numerators_solve_the_system():
    rng = np.random.default_rng(4)
    for _ in range(200):
        v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        tp = tet_polynomials(v, w)
        sys = build_system(v, w)
        for lam in (-2, -1, 0, 1, 2):
            q = tp.Q(lam)
            if abs(q) < 1e-6:
                continue
            mu = np.array([p(lam) for p in tp.P]) / q
            ref = pointwise_mu(v, w, lam)
            assert np.allclose(mu, ref, rtol=1e-9, atol=1e-9)
            lhs = (sys.A - lam * sys.B) @ mu[:3] + (sys.a - lam * sys.b)
            assert np.linalg.norm(lhs) <= 1e-9 * (1 + np.linalg.norm(sys.a - lam * sys.b))


def test_sum_identity():
    rng = np.random.default_rng(5)
    for _ in range(500):
        tp = tet_polynomials(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)))
        total = np.sum([p.coeffs for p in tp.P], axis=0)
        scale = max(p.scale for p in tp.P + (tp.Q,))
        assert np.max(np.abs(total - tp.Q.coeffs)) <= 1e-12 * scale


def test_q_is_4x4_determinant():
    rng = np.random.default_rng(6)
    v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    tp = tet_polynomials(v, w)
    ratios = [pencil_determinant(v, w, lam) / tp.Q(lam) for lam in (-1.5, 0.3, 2.0)]
    assert np.allclose(ratios, ratios[0]) and abs(ratios[0]) == pytest.approx(1.0)


def test_vertex_independence_bitwise():
    rng = np.random.default_rng(7)
    for _ in range(100):
        v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        base = tet_polynomials(v, w)
        for i in range(4):
            v2, w2 = v.copy(), w.copy()
            v2[i] += rng.normal(size=3)
            w2[i] += rng.normal(size=3)
            assert tet_polynomials(v2, w2).P[i].coeffs == base.P[i].coeffs


def test_p3_is_face_characteristic():
    rng = np.random.default_rng(8)
    for _ in range(100):
        v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        p3 = tet_polynomials(v, w).P3
        face = triangle_characteristic(v[:3], w[:3])
        assert p3.coeffs == face.coeffs


def test_adjugate_identity():
    rng = np.random.default_rng(9)
    for _ in range(200):
        A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        lam = rng.normal() * 3
        coeffs = adjugate_coeffs(A, B)
        adj = coeffs[..., 0] + lam * coeffs[..., 1] + lam ** 2 * coeffs[..., 2]
        M = A - lam * B
        det = np.linalg.det(M)
        err = np.max(np.abs(adj @ M - det * np.eye(3)))
        assert err <= 1e-10 * max(1.0, np.max(np.abs(adj)) * np.max(np.abs(M)))


def test_identical_fields_share_root_one():
    rng = np.random.default_rng(10)
    v = rng.normal(size=(4, 3))
    tp = tet_polynomials(v, v)
    assert tp.degenerate_flag is Degeneracy.NONE
    shared = tp.shared_roots()
    assert len(shared) == 1 and shared[0].value == pytest.approx(1.0, abs=1e-7)


def test_zero_fields_flagged():
    tp = tet_polynomials(np.zeros((4, 3)), np.zeros((4, 3)))
    assert tp.degenerate_flag is Degeneracy.ZERO_EVERYTHING


def test_constant_parallel_fields_flagged():
    v = np.tile([1.0, 0.0, 0.0], (4, 1))
    assert tet_polynomials(v, v).degenerate_flag is Degeneracy.ZERO_EVERYTHING


def test_triangle_characteristic_identical_columns():
    rng = np.random.default_rng(11)
    v = rng.normal(size=(3, 3))
    p = triangle_characteristic(v, v)
    d = np.linalg.det(v.T)
    assert np.allclose(p.coeffs, [d, -3 * d, 3 * d, -d], rtol=1e-12)


def test_triangle_characteristic_degree_drop():
    w = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])  # singular
    p = triangle_characteristic(np.eye(3), w)
    assert p.c3 == 0.0 and p.effective_degree() < 3


def test_triangle_characteristic_frozen_roots():
    # generalized eigenvalues of (V, W) from scipy.linalg.eigvals, frozen
    v = np.array([[1.0, 2, 0], [0, 1, 3], [2, -1, 1]])
    w = np.array([[0.0, 1, 1], [1, 0, 2], [-1, 1, 0]])
    roots = [r.value for r in real_roots(triangle_characteristic(v, w))]
    assert roots == pytest.approx([-1.6549108164643735, 1.5955906738074537, 6.059320142656916], abs=1e-12)


def test_face_points_z_axis():
    # v = position, w = e_z: the axis x = y = 0 is the edge p0-p3 of the unit tet
    w = np.tile([0.0, 0.0, 1.0], (3, 1))
    bottom = solve_face_points(UNIT_TET[[0, 1, 2]], w)
    assert [lam for lam, _ in bottom] == [0.0]
    assert np.allclose(bottom[0][1], [1, 0, 0])
    slanted = solve_face_points(UNIT_TET[[1, 2, 3]], w)
    assert [lam for lam, _ in slanted] == [1.0]
    assert np.allclose(slanted[0][1], [0, 0, 1])
    # the faces holding the edge contain a whole segment of solutions
    with pytest.raises(DegenerateFace):
        solve_face_points(UNIT_TET[[0, 1, 3]], w)


def test_face_points_outside_triangle():
    # v x w vanishes only on the line through (5, 5, 0) parallel to z
    pos = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 1]])
    v = pos - [5.0, 5.0, 0.0]
    w = np.tile([0.0, 0.0, 1.0], (3, 1))
    assert solve_face_points(v, w) == []


def test_face_points_line_of_solutions():
    v = np.tile([1.0, 0.0, 0.0], (3, 1))
    v[1] = [2.0, 0.0, 0.0]
    with pytest.raises(DegenerateFace):
        solve_face_points(v, v)


def test_face_points_residual():
    rng = np.random.default_rng(12)
    count = 0
    for _ in range(2000):
        v, w = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        for lam, mu in solve_face_points(v, w):
            count += 1
            assert np.all(mu >= 0) and mu.sum() == pytest.approx(1.0, abs=1e-15)
            vx, wx = mu @ v, mu @ w
            assert normalized_residual(vx, wx) <= 1e-8
    assert count > 100


def test_numerators_entry_point():
    rng = np.random.default_rng(13)
    v, w = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    assert numerators(build_system(v, w)).P == tet_polynomials(v, w).P
