"""Brute-force validators that do not share code with the extractor.

Everything here works from the raw vertex values and numpy linear algebra:
dense barycentric sampling of the normalized cross product, Gauss-Newton
projection of low-residual samples onto the zero set, and pointwise checks
of the rational parametrization and of sign tables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

EPS_NORM = 1e-300
RESIDUAL_THRESHOLD = 1e-4
# a candidate sample is projected when its linearized distance is below this many cells
_CANDIDATE_CELLS = 3.0
_GN_STEPS = 30
_MATCH_CELLS = 2.0


class Verdict(enum.Enum):
    AGREE = "Agree"
    DISAGREE = "Disagree"
    DEGENERATE = "Degenerate"


@dataclass
class OracleReport:
    case_id: str
    max_residual: float = 0.0
    matched_clusters: int = 0
    unmatched_clusters: int = 0
    matched_segments: int = 0
    unmatched_segments: int = 0
    verdict: Verdict = Verdict.AGREE
    details: list = field(default_factory=list)

    def merge(self, other: "OracleReport") -> None:
        self.max_residual = max(self.max_residual, other.max_residual)
        self.matched_clusters += other.matched_clusters
        self.unmatched_clusters += other.unmatched_clusters
        self.matched_segments += other.matched_segments
        self.unmatched_segments += other.unmatched_segments
        self.details.extend(other.details)
        if other.verdict is Verdict.DISAGREE or self.verdict is Verdict.DISAGREE:
            self.verdict = Verdict.DISAGREE
        elif other.verdict is Verdict.DEGENERATE:
            self.verdict = Verdict.DEGENERATE

    def as_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "verdict": self.verdict.value,
            "max_residual": self.max_residual,
            "matched_clusters": self.matched_clusters,
            "unmatched_clusters": self.unmatched_clusters,
            "matched_segments": self.matched_segments,
            "unmatched_segments": self.unmatched_segments,
            "details": list(self.details),
        }


@lru_cache(maxsize=4)
def barycentric_grid(grid_n: int) -> np.ndarray:
    """All (i, j, k, l) / grid_n with i + j + k + l = grid_n, shape (M, 4)."""
    n = int(grid_n)
    rows = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = np.arange(n + 1 - i - j)
            rows.append(np.stack([np.full_like(k, i), np.full_like(k, j), k, n - i - j - k], axis=1))
    grid = np.concatenate(rows).astype(float) / n
    grid.setflags(write=False)
    return grid


def normalized_residual(vx: np.ndarray, wx: np.ndarray) -> np.ndarray:
    cross = np.cross(vx, wx)
    scale = np.linalg.norm(vx, axis=-1) * np.linalg.norm(wx, axis=-1)
    return np.linalg.norm(cross, axis=-1) / (scale + EPS_NORM)


def sample_tet_residual(vv, ww, grid_n: int):
    """Normalized residual on a regular barycentric grid of spacing 1/grid_n.

    Returns ``(mu, residual)`` with ``mu`` of shape (M, 4).
    """
    if grid_n < 10:
        raise ValueError("grid_n must be at least 10")
    vv = np.asarray(vv, dtype=float).reshape(4, 3)
    ww = np.asarray(ww, dtype=float).reshape(4, 3)
    mu = barycentric_grid(grid_n)
    return mu, normalized_residual(mu @ vv, mu @ ww)


def _jacobian(vx, wx, dv, dw):
    """d(v x w)/d(mu1, mu2, mu3); columns are v x dw_k - w x dv_k."""
    return np.cross(vx[:, None, :], dw.T[None]).transpose(0, 2, 1) - \
        np.cross(wx[:, None, :], dv.T[None]).transpose(0, 2, 1)


def _free(mu):
    return mu[..., 1:]


def _full(x):
    return np.concatenate([1.0 - x.sum(axis=-1, keepdims=True), x], axis=-1)


def project_to_zero_set(vv, ww, mu0, steps: int = _GN_STEPS):
    """Gauss-Newton on v x w = 0 from the starting points ``mu0`` (M, 4).

    The Jacobian has rank two on the curve, so each step uses the rank-2
    pseudo-inverse.  Returns the final points and their normalized residuals.
    """
    vv = np.asarray(vv, dtype=float)
    ww = np.asarray(ww, dtype=float)
    dv = (vv[1:] - vv[0]).T  # d v / d(mu1, mu2, mu3)
    dw = (ww[1:] - ww[0]).T
    x = _free(np.asarray(mu0, dtype=float)).copy()
    active = np.arange(len(x))
    for _ in range(steps):
        if not len(active):
            break
        mu = _full(x[active])
        vx, wx = mu @ vv, mu @ ww
        c = np.cross(vx, wx)
        jac = _jacobian(vx, wx, dv, dw)
        u, s, vt = np.linalg.svd(jac)
        keep = s[:, :2] > 1e-14 * np.maximum(s[:, :1], EPS_NORM)
        inv = np.where(keep, 1.0 / np.maximum(s[:, :2], EPS_NORM), 0.0)
        coef = np.einsum("mij,mi->mj", u[:, :, :2], c) * inv
        step = np.einsum("mji,mj->mi", vt[:, :2, :], coef)
        x[active] -= step
        active = active[np.abs(step).max(axis=1) > 1e-15]
    mu = _full(x)
    return mu, normalized_residual(mu @ vv, mu @ ww)


def _candidates(vv, ww, mu, grid_n):
    """Grid samples whose linearized distance to the zero set is small."""
    dv = (vv[1:] - vv[0]).T
    dw = (ww[1:] - ww[0]).T
    vx, wx = mu @ vv, mu @ ww
    c = np.linalg.norm(np.cross(vx, wx), axis=-1)
    jn = np.sqrt(np.sum(_jacobian(vx, wx, dv, dw) ** 2, axis=(1, 2)))
    h = 1.0 / grid_n
    return np.nonzero(c <= _CANDIDATE_CELLS * h * jn)[0]


def segment_samples(seg, h: float, max_points: int = 200000) -> np.ndarray:
    """Barycentric samples of a segment with consecutive gaps below h/2.

    The rational coordinates are evaluated with numpy directly from the
    segment's coefficient arrays.  The parameter is the angle 2 atan(lam).
    """
    num = np.array([p.coeffs for p, _ in seg.rationals])
    den = np.array([q.coeffs for _, q in seg.rationals])
    iv = seg.interval
    if iv.full:
        lo, hi = -math.pi, math.pi
    else:
        lo = -math.pi if math.isinf(iv.lo) else 2.0 * math.atan(iv.lo)
        hi = math.pi if math.isinf(iv.hi) else 2.0 * math.atan(iv.hi)
        if hi < lo or (hi == lo and not iv.lo_closed):
            hi += 2.0 * math.pi
        span = hi - lo
        if not iv.lo_closed:
            lo += 1e-9 * span
        if not iv.hi_closed:
            hi -= 1e-9 * span

    def at(theta):
        # homogeneous evaluation in (cos, sin) of theta/2 keeps lam = inf finite
        c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
        powers = np.stack([c ** 3, c ** 2 * s, c * s ** 2, s ** 3], axis=-1)
        return (powers @ num.T) / (powers @ den.T)

    theta = np.linspace(lo, hi, 257)
    pts = at(theta)
    while len(theta) < max_points:
        gaps = np.linalg.norm(np.diff(pts[:, 1:], axis=0), axis=1)
        bad = np.nonzero(~(gaps <= 0.5 * h))[0]
        if not len(bad):
            break
        mids = 0.5 * (theta[bad] + theta[bad + 1])
        theta = np.sort(np.concatenate([theta, mids]))
        pts = at(theta)
    return pts


def _clusters(points, link):
    if len(points) == 0:
        return np.zeros(0, dtype=int), 0
    pairs = cKDTree(points).query_pairs(link, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(points),) * 2)
    count, labels = connected_components(graph, directed=False)
    return labels, count


def verify_tet(vv, ww, segments, grid_n: int = 100, threshold: float = RESIDUAL_THRESHOLD,
               case_id: str = "tet") -> OracleReport:
    """Compare one tetrahedron's segments with the sampled zero set.

    Low-residual samples are projected onto the zero set of v x w.  Every
    projected point strictly inside the cell must lie within two grid cells
    of a segment, and every segment must pass within two grid cells of a
    projected point.  Distances are measured in barycentric coordinates.
    """
    vv = np.asarray(vv, dtype=float).reshape(4, 3)
    ww = np.asarray(ww, dtype=float).reshape(4, 3)
    h = 1.0 / grid_n
    report = OracleReport(case_id)
    mu, res = sample_tet_residual(vv, ww, grid_n)

    both_zero = (np.linalg.norm(mu @ vv, axis=1) <= EPS_NORM ** 0.5) & (np.linalg.norm(mu @ ww, axis=1) <= EPS_NORM ** 0.5)
    if np.mean(res <= threshold) > 0.1 or np.mean(both_zero) > 0.1:
        report.verdict = Verdict.DEGENERATE
        report.details.append(f"{case_id}: fields parallel or vanishing on a volume of samples")
        return report

    seg_pts = [segment_samples(s, h) for s in segments]
    for pts in seg_pts:
        vx, wx = pts @ vv, pts @ ww
        if len(pts):
            report.max_residual = max(report.max_residual, float(normalized_residual(vx, wx).max()))

    cand = _candidates(vv, ww, mu, grid_n)
    feet = np.zeros((0, 4))
    if len(cand):
        proj, pres = project_to_zero_set(vv, ww, mu[cand])
        ok = (pres <= threshold) & np.all(proj >= -_MATCH_CELLS * h, axis=1)
        # many samples land on the same foot; keep one per quarter cell
        feet = proj[ok]
        _, first = np.unique(np.round(feet[:, 1:] * (4.0 / h)), axis=0, return_index=True)
        feet = feet[np.sort(first)]

    inside = feet[np.all(feet >= 0.5 * h, axis=1)]
    all_seg = np.concatenate(seg_pts)[:, 1:] if seg_pts else np.zeros((0, 3))
    link = _MATCH_CELLS * h
    labels, count = _clusters(inside[:, 1:], link)
    if count:
        if len(all_seg):
            dist, _ = cKDTree(all_seg).query(inside[:, 1:])
        else:
            dist = np.full(len(inside), np.inf)
        for k in range(count):
            far = dist[labels == k] > link
            if np.any(far):
                report.unmatched_clusters += 1
                worst = float(dist[labels == k].max())
                report.details.append(f"{case_id}: cluster of {int(np.sum(labels == k))} zero-set points, "
                                      f"{worst / h:.2f} cells from the nearest segment")
            else:
                report.matched_clusters += 1

    feet_tree = cKDTree(feet[:, 1:]) if len(feet) else None
    for s, pts in zip(segments, seg_pts):
        if feet_tree is not None and np.min(feet_tree.query(pts[:, 1:])[0]) <= link:
            report.matched_segments += 1
        else:
            report.unmatched_segments += 1
            report.details.append(f"{case_id}: segment on {s.interval} has no zero-set point nearby")

    if report.unmatched_clusters or report.unmatched_segments:
        report.verdict = Verdict.DISAGREE
    return report


def verify_segments(mesh, v, w, segments, grid_n: int = 100, tet_ids=None,
                    threshold: float = RESIDUAL_THRESHOLD, case_id: str = "mesh") -> OracleReport:
    """Run ``verify_tet`` on the given cells (all cells by default) and merge."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    by_tet: dict = {}
    for s in segments:
        by_tet.setdefault(int(s.tet_id), []).append(s)
    tet_ids = range(mesh.n_tets) if tet_ids is None else tet_ids
    tet_ids = sorted({int(t) for t in tet_ids})
    report = OracleReport(case_id)
    degenerate = 0
    for t in tet_ids:
        verts = mesh.tets[t]
        sub = verify_tet(v[verts], w[verts], by_tet.get(t, []), grid_n, threshold, f"{case_id}/tet{t}")
        if sub.verdict is Verdict.DEGENERATE:
            degenerate += 1
            sub.verdict = Verdict.AGREE
        report.merge(sub)
    if degenerate and report.verdict is Verdict.AGREE and degenerate == len(tet_ids):
        report.verdict = Verdict.DEGENERATE
    return report


def pointwise_mu(vv, ww, lam: float) -> np.ndarray:
    """Barycentric solution of v = lam w in a tetrahedron by a direct 4x4 solve."""
    vv = np.asarray(vv, dtype=float).reshape(4, 3)
    ww = np.asarray(ww, dtype=float).reshape(4, 3)
    m = np.vstack([(vv - lam * ww).T, np.ones(4)])
    return np.linalg.solve(m, np.array([0.0, 0.0, 0.0, 1.0]))


def pencil_determinant(vv, ww, lam: float) -> float:
    """det of the 4x4 system above; proportional to the cell's denominator."""
    vv = np.asarray(vv, dtype=float).reshape(4, 3)
    ww = np.asarray(ww, dtype=float).reshape(4, 3)
    return float(np.linalg.det(np.vstack([(vv - lam * ww).T, np.ones(4)])))


def brute_force_inequality(p_coeffs, q_coeffs, lams) -> np.ndarray:
    """Membership of each finite ``lam`` in {P/Q >= 0} by direct evaluation.

    Points where Q evaluates to exactly zero are reported as not members.
    """
    lams = np.asarray(lams, dtype=float)
    p = np.polyval(np.asarray(p_coeffs, dtype=float)[::-1], lams)
    q = np.polyval(np.asarray(q_coeffs, dtype=float)[::-1], lams)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (q != 0.0) & (p / q >= 0.0)
