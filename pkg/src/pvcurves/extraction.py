"""Two-pass extraction of parallel-vector curves on a tetrahedral mesh.

Pass one solves the characteristic polynomial of every triangle and records
the points where a curve pierces it.  Pass two visits the tetrahedra next to
those faces, computes the feasible parameter intervals of the cubic rational
curve inside the cell and ties each interval's finite ends to face points.
Segments meeting at a face point are then chained into curves.
"""

from __future__ import annotations

import math
import os
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .eigensystem import (
    EPS_BARY,
    Degeneracy,
    DegenerateFace,
    polynomials_from_coeffs,
    solve_face_points,
    tet_polynomial_coeffs,
    triangle_characteristic,
)
from .intervals import LambdaInterval, feasible_regions
from .mesh import TetMesh, check_field
from .polynomial import EPS_ROOT, CubicPolynomial, ZeroPolynomial, deflate_common_roots

EPS_MATCH = 1e-7
EPS_POS = 1e-9
MAX_CHORD_ERROR = 1e-3
LAMBDA_CAP = 1e6
_MAX_DEPTH = 24


class OutOfInterval(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    eps_root: float = EPS_ROOT
    eps_match: float = EPS_MATCH
    eps_bary: float = EPS_BARY
    eps_pos: float = EPS_POS  # relative to the mesh diameter
    max_chord_error: float = MAX_CHORD_ERROR  # relative to the mesh diameter

    def __post_init__(self):
        for name, val in vars(self).items():
            if not val > 0:
                raise ValueError(f"tolerance {name} must be positive, got {val}")


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    id: int
    detail: str = ""


@dataclass(frozen=True, eq=False)
class PVPoint:
    face_id: int
    index: int
    lam: float
    mu: np.ndarray
    position: np.ndarray

    @property
    def key(self) -> tuple[int, int]:
        return (self.face_id, self.index)


@dataclass(eq=False)
class CurveSegment:
    """One branch of the curve inside a tetrahedron.

    ``rationals[i]`` is the (numerator, denominator) pair of barycentric
    coordinate ``i`` after shared roots were divided out.  ``endpoints`` are
    the face points at the ``lo`` and ``hi`` ends of ``interval``.
    """

    tet_id: int
    interval: LambdaInterval
    rationals: tuple
    vertices: np.ndarray
    endpoints: tuple = (None, None)

    @property
    def has_w_critical_point(self) -> bool:
        return self.interval.contains_infinity

    def mu(self, lam: float) -> np.ndarray:
        return np.array([_ratio(p, q, lam) for p, q in self.rationals])

    def position(self, lam: float) -> np.ndarray:
        return self.mu(lam) @ self.vertices

    def critical_point(self) -> np.ndarray | None:
        """Position of the zero of w the branch passes through, if any."""
        return self.position(math.inf) if self.has_w_critical_point else None


def _ratio(p: CubicPolynomial, q: CubicPolynomial, lam: float) -> float:
    if math.isinf(lam):
        if p.is_zero():
            return 0.0
        dp, dq = p.effective_degree(), q.effective_degree()
        if dp < dq:
            return 0.0
        if dp == dq:
            return p.coeffs[dp] / q.coeffs[dq]
        return math.nan
    return p(lam) / q(lam)


def evaluate_segment(seg: CurveSegment, lam: float):
    """Barycentric coordinates and position of ``seg`` at parameter ``lam``."""
    if not seg.interval.contains(lam):
        raise OutOfInterval(f"lambda={lam} outside {seg.interval}")
    mu = seg.mu(lam)
    return mu, mu @ seg.vertices


@dataclass
class Polyline:
    points: np.ndarray
    lam: np.ndarray
    tet_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


@dataclass(eq=False)
class PVCurve:
    segments: list  # [(CurveSegment, reversed)]
    closed: bool = False
    polyline: Polyline | None = None


@dataclass
class ExtractionResult:
    mesh: TetMesh
    face_points: dict
    segments: list
    curves: list
    diagnostics: list
    branch_histogram: dict = field(default_factory=dict)
    processed_tets: np.ndarray | None = None

    def degenerate_cells(self) -> list[int]:
        kinds = {"zero-q", "zero-everything", "constant-lambda"}
        return sorted({d.id for d in self.diagnostics if d.kind in kinds})


# -- worker plumbing -------------------------------------------------------

_STATE: dict = {}


def _init_state(state):
    _STATE.clear()
    _STATE.update(state)


def _chunks(ids, n):
    ids = list(ids)
    size = max(1, math.ceil(len(ids) / max(1, n * 4)))
    return [ids[k:k + size] for k in range(0, len(ids), size)]


def _run(func, ids, state, workers):
    """Apply ``func`` to id chunks; results come back in id order."""
    if workers <= 1 or len(ids) < 2:
        _init_state(state)
        return [func(chunk) for chunk in _chunks(ids, 1)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_state, initargs=(state,)) as pool:
        return list(pool.map(func, _chunks(ids, workers)))


# -- pass one: faces -------------------------------------------------------


def _face_chunk(face_ids):
    mesh, v, w, tol = _STATE["mesh"], _STATE["v"], _STATE["w"], _STATE["tol"]
    out = []
    for f in face_ids:
        verts = mesh.faces[f]
        try:
            poly = triangle_characteristic(v[verts], w[verts])
            sols = solve_face_points(v[verts], w[verts], poly, eps_bary=tol.eps_bary)
        except (DegenerateFace, ZeroPolynomial) as exc:
            out.append((f, None, Diagnostic("degenerate-face", int(f), str(exc))))
            continue
        pts = []
        for k, (lam, mu) in enumerate(sols):
            pos = mu @ mesh.vertices[verts]
            pts.append(PVPoint(int(f), k, lam, mu, pos))
        out.append((f, pts, None))
    return out


@dataclass
class NumeratorResult:
    points: dict
    labeled_tets: np.ndarray
    diagnostics: list


def numerator_pass(mesh: TetMesh, v, w, *, workers: int = 1, tol: Tolerances | None = None):
    """Face points of every triangle and the tetrahedra that need pass two.

    A tetrahedron is labeled when one of its faces carries a point or is
    degenerate (so degenerate cells get reported by pass two).
    """
    tol = tol or Tolerances()
    v, w = check_field(mesh, v), check_field(mesh, w)
    state = {"mesh": mesh, "v": v, "w": w, "tol": tol}
    points, diags, marked = {}, [], []
    for chunk in _run(_face_chunk, range(mesh.n_faces), state, workers):
        for f, pts, diag in chunk:
            if diag is not None:
                diags.append(diag)
                marked.append(f)
            elif pts:
                points[f] = pts
                marked.append(f)
    tets = mesh.face_tets[marked].ravel() if marked else np.zeros(0, dtype=np.int64)
    labeled = np.unique(tets[tets >= 0])
    return NumeratorResult(points, labeled, diags)


# -- pass two: tetrahedra --------------------------------------------------


def tet_rationals(tp, eps_root: float = EPS_ROOT) -> tuple:
    pairs = []
    for P in tp.P:
        if P.is_zero():
            pairs.append((P, tp.Q))
        else:
            p, q, _ = deflate_common_roots(P, tp.Q, eps_root)
            pairs.append((p, q))
    return tuple(pairs)


def _lam_close(a: float, b: float, eps: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return math.isinf(a) and math.isinf(b)
    return abs(a - b) <= eps * (1.0 + abs(a))


def _match_endpoint(mesh, tet_id, seg, lam, face_points, tol):
    mu = seg.mu(lam)
    if not np.all(np.isfinite(mu)):
        return None
    best = None
    for i in np.argsort(np.abs(mu), kind="stable"):
        if abs(mu[i]) > 1e-6:
            break
        face = int(mesh.tet_faces[tet_id, i])
        for pt in face_points.get(face, ()):
            if _lam_close(pt.lam, lam, tol.eps_match):
                gap = 0.0 if math.isinf(lam) else abs(pt.lam - lam)
                if best is None or gap < best[0]:
                    best = (gap, pt)
        if best is not None:
            break
    return None if best is None else best[1]


def analyze_tet(mesh: TetMesh, v, w, tet_id: int, face_points: dict, tol: Tolerances):
    """Segments and diagnostics for one tetrahedron (pass two for one cell)."""
    verts = mesh.tets[tet_id]
    vv, ww = v[verts], w[verts]
    tp = polynomials_from_coeffs(tet_polynomial_coeffs(vv, ww), vv, ww)
    diags = []
    if tp.degenerate_flag is not Degeneracy.NONE:
        return [], [Diagnostic(tp.degenerate_flag.value, int(tet_id), "characteristic polynomial vanishes")], None
    shared = tp.shared_roots()
    if shared:
        detail = "Q and every P_i vanish at lambda=" + ",".join(repr(r.value) for r in shared)
        return [], [Diagnostic("constant-lambda", int(tet_id), detail)], None
    regions = feasible_regions(tp, tol.eps_root)
    rationals = tet_rationals(tp, tol.eps_root)
    positions = mesh.vertices[verts]
    segments = []
    for iv in regions:
        if iv.is_point:
            diags.append(Diagnostic("touch", int(tet_id), f"curve touches the cell at lambda={iv.lo!r}"))
            continue
        seg = CurveSegment(int(tet_id), iv, rationals, positions)
        ends = []
        for lam in (iv.lo, iv.hi) if not iv.full else ():
            pt = _match_endpoint(mesh, tet_id, seg, lam, face_points, tol)
            if pt is None and not math.isinf(lam):
                diags.append(Diagnostic("unmatched-endpoint", int(tet_id), f"no face point at lambda={lam!r}"))
            ends.append(pt)
        seg.endpoints = tuple(ends) if ends else (None, None)
        segments.append(seg)
    return segments, diags, len(regions)


def _tet_chunk(tet_ids):
    mesh, v, w, tol = _STATE["mesh"], _STATE["v"], _STATE["w"], _STATE["tol"]
    fp = _STATE["face_points"]
    return [analyze_tet(mesh, v, w, t, fp, tol) for t in tet_ids]


def denominator_pass(mesh: TetMesh, v, w, face_points: dict, tet_ids=None, *,
                     workers: int = 1, tol: Tolerances | None = None):
    """Curve segments of the given (labeled) tetrahedra.

    Returns ``(segments, diagnostics, branch_histogram)``; the histogram
    counts feasible intervals per non-degenerate cell.
    """
    tol = tol or Tolerances()
    v, w = check_field(mesh, v), check_field(mesh, w)
    if tet_ids is None:
        tet_ids = np.arange(mesh.n_tets)
    tet_ids = sorted(int(t) for t in tet_ids)
    state = {"mesh": mesh, "v": v, "w": w, "tol": tol, "face_points": face_points}
    segments, diags, hist = [], [], Counter()
    for chunk in _run(_tet_chunk, tet_ids, state, workers):
        for segs, ds, count in chunk:
            segments.extend(segs)
            diags.extend(ds)
            if count is not None:
                hist[count] += 1
    return segments, diags, dict(sorted(hist.items()))


# -- stitching -------------------------------------------------------------


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            lo, hi = sorted((ra, rb))
            self.parent[hi] = lo


def _endpoint_nodes(segments, eps_pos, eps_match):
    """Map (segment index, end) to a junction id.

    Face points are joined when they coincide in space and parameter, which
    happens when a curve crosses an edge or vertex shared by several faces.
    """
    uf = _UnionFind()
    pts = {}
    for seg in segments:
        for pt in seg.endpoints:
            if pt is not None:
                pts[pt.key] = pt
                uf.find(pt.key)
    keys = sorted(pts)
    if len(keys) > 1:
        tree = cKDTree(np.array([pts[k].position for k in keys]))
        for a, b in sorted(tree.query_pairs(max(eps_pos, 0.0))):
            if _lam_close(pts[keys[a]].lam, pts[keys[b]].lam, eps_match):
                uf.union(keys[a], keys[b])
    nodes = {}
    for s, seg in enumerate(segments):
        for end, pt in enumerate(seg.endpoints):
            nodes[(s, end)] = None if pt is None else uf.find(pt.key)
    return nodes


def stitch(segments, *, eps_pos: float | None = None, eps_match: float = EPS_MATCH,
           max_chord_error: float | None = None):
    """Chain segments that share face points into curves.

    Returns ``(curves, diagnostics)``.  Junctions joining more than two
    segments are reported and the curves are split there.
    """
    segments = list(segments)
    if eps_pos is None:
        eps_pos = EPS_POS * _extent(segments)
    nodes = _endpoint_nodes(segments, eps_pos, eps_match)
    incid = defaultdict(list)
    for key, node in nodes.items():
        if node is not None:
            incid[node].append(key)
    diags = []
    for node in sorted(incid):
        if len(incid[node]) > 2:
            tets = sorted({segments[s].tet_id for s, _ in incid[node]})
            diags.append(Diagnostic("ambiguous-junction", node[0],
                                    f"{len(incid[node])} segments meet at face point {node}; tets {tets}"))

    def terminal(s, end):
        node = nodes[(s, end)]
        return node is None or len(incid[node]) != 2

    visited = [False] * len(segments)

    def walk(start, entry):
        chain, closed = [], False
        cur = start
        while True:
            visited[cur] = True
            chain.append((segments[cur], entry == 1))
            out = (cur, 1 - entry)
            if terminal(*out):
                break
            nxt = next(k for k in incid[nodes[out]] if k != out)
            if visited[nxt[0]]:
                closed = nxt[0] == start
                break
            cur, entry = nxt
        return PVCurve(chain, closed or segments[start].interval.full)

    curves = []
    for s in range(len(segments)):
        if visited[s]:
            continue
        for end in (0, 1):
            if terminal(s, end):
                curves.append(walk(s, end))
                break
    for s in range(len(segments)):
        if not visited[s]:
            curves.append(walk(s, 0))
    if max_chord_error is not None:
        for curve in curves:
            curve.polyline = sample_polyline(curve, max_chord_error)
    return curves, diags


def _extent(segments) -> float:
    if not segments:
        return 1.0
    pts = np.concatenate([s.vertices for s in segments])
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))) or 1.0


# -- sampling --------------------------------------------------------------


def _theta(lam: float) -> float:
    return math.pi if math.isinf(lam) else 2.0 * math.atan(lam)


def _lam(theta: float) -> float:
    t = math.remainder(theta, 2.0 * math.pi)
    if t == math.pi or t == -math.pi:
        return math.inf
    return math.tan(0.5 * t)


def _theta_range(iv: LambdaInterval):
    if iv.full:
        return -math.pi, math.pi
    lo = -math.pi if math.isinf(iv.lo) else _theta(iv.lo)
    hi = math.pi if math.isinf(iv.hi) else _theta(iv.hi)
    if hi < lo or (hi == lo and not iv.lo_closed):
        hi += 2.0 * math.pi
    # open finite ends are poles of some coordinate: stay strictly inside
    if not iv.lo_closed and not math.isinf(iv.lo):
        lo += 1e-9 * (hi - lo)
    if not iv.hi_closed and not math.isinf(iv.hi):
        hi -= 1e-9 * (hi - lo)
    return lo, hi


def _chord_dev(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def _lambda_cap(seg: CurveSegment) -> float:
    finite = [abs(x) for x in seg.interval.endpoints() if not math.isinf(x)]
    return LAMBDA_CAP * (1.0 + (float(np.median(finite)) if finite else 0.0))


def sample_segment(seg: CurveSegment, max_chord_error: float):
    """Adaptive samples of one segment as (thetas, lams, positions).

    The parameter is the angle ``theta = 2 atan(lam)`` so arcs through
    infinity are ordinary ranges; such an arc is split at the critical point
    of w, which is emitted exactly with ``lam = inf``.
    """
    lo, hi = _theta_range(seg.interval)
    cuts = [lo]
    k = math.ceil((lo - math.pi) / (2 * math.pi))
    while math.pi + 2 * math.pi * k < hi:
        if math.pi + 2 * math.pi * k > lo:
            cuts.append(math.pi + 2 * math.pi * k)
        k += 1
    cuts.append(hi)
    cap = _lambda_cap(seg)
    # closed finite ends are evaluated at their exact parameter, not tan(atan(x))
    exact = {}
    if not seg.interval.full:
        if seg.interval.lo_closed and not math.isinf(seg.interval.lo):
            exact[cuts[0]] = seg.interval.lo
        if seg.interval.hi_closed and not math.isinf(seg.interval.hi):
            exact[cuts[-1]] = seg.interval.hi

    def lam_at(theta):
        return exact[theta] if theta in exact else _lam(theta)

    def pos(theta):
        return seg.position(lam_at(theta))

    thetas = [cuts[0]]
    points = [pos(cuts[0])]
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        _refine(pos, t0, points[-1], t1, pos(t1), max_chord_error, 0, thetas, points)
    lams = [lam_at(t) for t in thetas]
    keep = [i for i, x in enumerate(lams) if math.isinf(x) or abs(x) <= cap]
    keep = [i for i in keep if np.all(np.isfinite(points[i]))]
    return (np.array([thetas[i] for i in keep]), np.array([lams[i] for i in keep]),
            np.array([points[i] for i in keep]).reshape(-1, 3))


def _refine(pos, t0, p0, t1, p1, tol, depth, thetas, points):
    probes = [t0 + f * (t1 - t0) for f in (0.25, 0.5, 0.75)]
    pp = [pos(t) for t in probes]
    dev = max(_chord_dev(p, p0, p1) for p in pp)
    if dev <= tol or depth >= _MAX_DEPTH:
        thetas.append(t1)
        points.append(p1)
        return
    tm, pm = probes[1], pp[1]
    _refine(pos, t0, p0, tm, pm, tol, depth + 1, thetas, points)
    _refine(pos, tm, pm, t1, p1, tol, depth + 1, thetas, points)


def sample_polyline(curve: PVCurve, max_chord_error: float) -> Polyline:
    """Polyline through the curve with per-point lambda and source tet."""
    pts, lams, tets = [], [], []
    for seg, rev in curve.segments:
        _, lam, p = sample_segment(seg, max_chord_error)
        if rev:
            lam, p = lam[::-1], p[::-1]
        pts.append(p)
        lams.append(lam)
        tets.append(np.full(len(lam), seg.tet_id, dtype=np.int64))
    if not pts:
        return Polyline(np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=np.int64))
    return Polyline(np.concatenate(pts), np.concatenate(lams), np.concatenate(tets))


# -- driver ----------------------------------------------------------------


def extract(mesh: TetMesh, v, w, *, workers: int = 1, tol: Tolerances | None = None) -> ExtractionResult:
    """Run both passes and stitching; polylines use ``tol.max_chord_error``."""
    tol = tol or Tolerances()
    workers = workers or os.cpu_count() or 1
    num = numerator_pass(mesh, v, w, workers=workers, tol=tol)
    segments, diags, hist = denominator_pass(mesh, v, w, num.points, num.labeled_tets,
                                             workers=workers, tol=tol)
    diameter = mesh.diameter() or 1.0
    curves, stitch_diags = stitch(segments, eps_pos=tol.eps_pos * diameter, eps_match=tol.eps_match,
                                  max_chord_error=tol.max_chord_error * diameter)
    return ExtractionResult(mesh, num.points, segments, curves, num.diagnostics + diags + stitch_diags,
                            hist, num.labeled_tets)
