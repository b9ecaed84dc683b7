import math

import numpy as np
import pytest

from pvcurves.extraction import (
    OutOfInterval,
    Tolerances,
    evaluate_segment,
    extract,
    sample_segment,
)
from pvcurves.mesh import TetMesh, sujudi_haimes_field, tessellate_grid
from pvcurves.oracle import normalized_residual

from .cases import CONFIGURATIONS, UNIT_TET, smooth_field, vortex_field

X0, Y0 = 1.37, 1.61


def axis_distance(points):
    return np.hypot(points[:, 0] - X0, points[:, 1] - Y0)


def curve_points(res):
    return np.concatenate([c.polyline.points for c in res.curves])


def polyline_residual(res, v, w):
    worst = 0.0
    for c in res.curves:
        for p, lam, t in zip(c.polyline.points, c.polyline.lam, c.polyline.tet_ids):
            verts = res.mesh.tets[t]
            segs = [s for s in res.segments if s.tet_id == t]
            mu = None
            for s in segs:
                if s.interval.contains(lam):
                    mu = s.mu(lam)
                    break
            assert mu is not None, (t, lam)
            worst = max(worst, float(normalized_residual(mu @ v[verts], mu @ w[verts])))
    return worst


def z_axis_case():
    mesh = TetMesh(UNIT_TET, [[0, 1, 2, 3]])
    return mesh, UNIT_TET.copy(), np.tile([0.0, 0.0, 1.0], (4, 1))


def test_z_axis_segment():
    mesh, v, w = z_axis_case()
    res = extract(mesh, v, w)
    assert len(res.segments) == 1
    seg = res.segments[0]
    assert (seg.interval.lo, seg.interval.hi) == (0.0, 1.0)
    assert seg.interval.lo_closed and seg.interval.hi_closed
    lo, hi = seg.endpoints
    assert lo is not None and hi is not None
    assert np.allclose(lo.position, [0, 0, 0]) and np.allclose(hi.position, [0, 0, 1])
    mu, x = evaluate_segment(seg, 0.5)
    assert np.allclose(x, [0, 0, 0.5], atol=1e-15)
    assert mu.sum() == pytest.approx(1.0)
    with pytest.raises(OutOfInterval):
        evaluate_segment(seg, 1.5)


def test_straight_segment_needs_two_samples():
    mesh, v, w = z_axis_case()
    seg = extract(mesh, v, w).segments[0]
    _, lams, pts = sample_segment(seg, 1e-6)
    assert list(lams) == [0.0, 1.0] and len(pts) == 2


def test_two_tets_share_a_face():
    pts = np.vstack([UNIT_TET, [[0.0, 0.0, -1.0]]])
    mesh = TetMesh(pts, [[0, 1, 2, 3], [0, 1, 2, 4]])
    v = pts - [0.2, 0.2, 0.0]
    w = np.tile([0.0, 0.0, 1.0], (5, 1))
    res = extract(mesh, v, w)
    assert len(res.segments) == 2 and len(res.curves) == 1
    keys = [{p.key for p in s.endpoints} for s in res.segments]
    shared = keys[0] & keys[1]
    assert len(shared) == 1
    face = next(iter(shared))[0]
    assert sorted(mesh.faces[face]) == [0, 1, 2]
    line = res.curves[0].polyline
    assert np.allclose(line.points[:, :2], 0.2, atol=1e-14)
    ends = sorted([line.points[0, 2], line.points[-1, 2]])
    assert ends == pytest.approx([-0.6, 0.6])


def offset_axis_case():
    mesh, = tessellate_grid((5, 5, 5), (0.8, 0.8, 0.8), (0.0, 0.0, -1.6))
    v = mesh.vertices - [X0, Y0, 0.0]
    w = np.tile([0.0, 0.0, 1.0], (mesh.n_vertices, 1))
    return mesh, v, w


def vortex_case():
    mesh, = tessellate_grid((5, 5, 5), (0.8, 0.8, 0.8), (0.0, 0.0, -2.0))
    v = vortex_field(mesh.vertices)
    return mesh, v, sujudi_haimes_field(mesh, v)


@pytest.mark.parametrize("make", [offset_axis_case, vortex_case])
def test_axis_fields_recover_the_axis(make):
    mesh, v, w = make()
    res = extract(mesh, v, w)
    assert len(res.curves) == 1 and not res.curves[0].closed
    pts = curve_points(res)
    assert axis_distance(pts).max() <= 1e-6
    z = pts[:, 2]
    lo, hi = mesh.vertices[:, 2].min(), mesh.vertices[:, 2].max()
    assert z.min() == pytest.approx(lo) and z.max() == pytest.approx(hi)
    assert not [d for d in res.diagnostics if d.kind != "degenerate-face"]


def test_vortex_passes_a_zero_of_w():
    mesh, v, w = vortex_case()
    res = extract(mesh, v, w)
    crit = [s.critical_point() for s in res.segments if s.has_w_critical_point]
    assert crit
    for c in crit:
        assert axis_distance(c[None])[0] <= 1e-6
    assert any(np.isinf(c.polyline.lam).any() for c in res.curves)


def smooth_case(seed):
    rng = np.random.default_rng(seed)
    mesh, = tessellate_grid((5, 5, 5))
    return mesh, smooth_field(rng, mesh.vertices), smooth_field(rng, mesh.vertices)


@pytest.mark.parametrize("seed", range(4))
def test_endpoints_match_across_passes(seed):
    mesh, v, w = smooth_case(seed)
    res = extract(mesh, v, w)
    owners = {}
    for s in res.segments:
        iv = s.interval
        for end, (lam, closed) in enumerate([(iv.lo, iv.lo_closed), (iv.hi, iv.hi_closed)]):
            if iv.full or math.isinf(lam):
                continue
            pt = s.endpoints[end]
            assert pt is not None and closed
            assert abs(pt.lam - lam) <= 1e-7 * (1 + abs(lam))
            owners.setdefault(pt.key, []).append(s.tet_id)
    for key, tets in owners.items():
        interior = mesh.face_tets[key[0], 1] >= 0
        assert len(tets) == (2 if interior else 1), key


@pytest.mark.parametrize("seed", range(4))
def test_polyline_residuals(seed):
    mesh, v, w = smooth_case(seed)
    res = extract(mesh, v, w)
    assert res.curves
    assert polyline_residual(res, v, w) <= 1e-8


def test_workers_are_bitwise_identical():
    mesh, v, w = smooth_case(7)
    a = extract(mesh, v, w, workers=1)
    b = extract(mesh, v, w, workers=2)
    assert len(a.curves) == len(b.curves)
    for ca, cb in zip(a.curves, b.curves):
        assert ca.polyline.points.tobytes() == cb.polyline.points.tobytes()
        assert ca.polyline.lam.tobytes() == cb.polyline.lam.tobytes()
    assert a.diagnostics == b.diagnostics


def test_vertex_order_does_not_change_segments():
    rng = np.random.default_rng(5)
    mesh, v, w = smooth_case(5)
    tets = np.array([rng.permutation(t) for t in mesh.tets])
    other = TetMesh(mesh.vertices, tets)
    a, b = extract(mesh, v, w), extract(other, v, w)

    def summary(res):
        return sorted((s.tet_id, round(s.interval.lo, 8), round(s.interval.hi, 8)) for s in res.segments)

    assert summary(a) == summary(b)


def test_finer_chord_tolerance_adds_points():
    mesh, v, w = smooth_case(1)
    counts = []
    for tol in (1e-2, 1e-3, 1e-4):
        res = extract(mesh, v, w, tol=Tolerances(max_chord_error=tol))
        counts.append(sum(len(c.polyline) for c in res.curves))
    assert counts[0] <= counts[1] <= counts[2]
    assert counts[2] > counts[0]


def test_four_branch_cell():
    case = CONFIGURATIONS["h"]
    mesh = TetMesh(UNIT_TET, [[0, 1, 2, 3]])
    res = extract(mesh, np.array(case["v"], float), np.array(case["w"], float))
    assert len(res.segments) == 4
    assert res.branch_histogram == {4: 1}
    assert all(p is not None for s in res.segments for p, lam in zip(s.endpoints, s.interval.endpoints())
               if not math.isinf(lam))
    assert sum(1 for s in res.segments if s.has_w_critical_point) == 1


def test_identical_fields_are_reported():
    rng = np.random.default_rng(3)
    mesh, = tessellate_grid((3, 3, 3))
    v = rng.normal(size=(mesh.n_vertices, 3))
    res = extract(mesh, v, v.copy())
    assert not res.segments and not res.curves
    assert res.degenerate_cells()
    assert {d.kind for d in res.diagnostics} <= {"constant-lambda", "degenerate-face"}


def test_zero_fields_are_reported():
    mesh, = tessellate_grid((2, 2, 2))
    z = np.zeros((mesh.n_vertices, 3))
    res = extract(mesh, z, z)
    assert not res.curves
    assert res.degenerate_cells() == list(range(mesh.n_tets))


def test_bad_tolerance():
    with pytest.raises(ValueError):
        Tolerances(eps_match=0.0)
