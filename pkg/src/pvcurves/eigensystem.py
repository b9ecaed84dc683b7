"""Per-tetrahedron characteristic polynomials of the parallel-vector system.

Inside a tetrahedron with vertex values ``v_i``, ``w_i`` the condition
``v = lam * w`` reduces (eliminating the last barycentric coordinate) to

    (A - lam B) mu = -(a - lam b)

with ``A[:, i] = v_i - v_3``, ``a = v_3`` and likewise for ``B``, ``b``.
Multiplying by the adjugate gives ``Q(lam) mu = P(lam)`` where
``Q = det(A - lam B)`` and ``P = -adj(A - lam B)(a - lam b)``; every
coefficient is expanded symbolically from minors, never fitted.

All ``*_coeffs`` helpers are batched over leading axes and return ascending
coefficient arrays with a trailing axis of length 4.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .polynomial import CubicPolynomial, ZeroPolynomial, real_roots

EPS_BARY = 1e-9
EPS_NULL = 1e-10
# polynomial coefficients below this fraction of their natural scale count as zero
EPS_ZERO_REL = 1e-13


class NonFiniteInput(ValueError):
    pass


class DegenerateFace(ValueError):
    """The null space at a root is more than one-dimensional."""


class Degeneracy(enum.Enum):
    NONE = "none"
    ZERO_Q = "zero-q"
    ZERO_EVERYTHING = "zero-everything"


@dataclass(frozen=True)
class EigenSystem:
    A: np.ndarray
    B: np.ndarray
    a: np.ndarray
    b: np.ndarray
    # raw vertex values (4, 3); P_3 is expanded from these directly
    v: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class TetPolynomials:
    Q: CubicPolynomial
    P: tuple  # (P0, P1, P2, P3)
    degenerate_flag: Degeneracy = Degeneracy.NONE

    @property
    def P0(self):
        return self.P[0]

    @property
    def P1(self):
        return self.P[1]

    @property
    def P2(self):
        return self.P[2]

    @property
    def P3(self):
        return self.P[3]

    def shared_roots(self) -> tuple:
        """Real roots of Q at which every P_i also vanishes."""
        if self.degenerate_flag is not Degeneracy.NONE or self.Q.effective_degree() == 0:
            return ()
        shared = []
        for root in real_roots(self.Q):
            tol = 1e-8 * (1.0 + abs(root.value))
            if all(p.is_zero() or _has_root_near(p, root.value, tol) for p in self.P):
                shared.append(root)
        return tuple(shared)


def _has_root_near(p: CubicPolynomial, x: float, tol: float) -> bool:
    return any(abs(r.value - x) <= tol for r in real_roots(p))


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("vertex field values must be finite")


def _det3_cols(c0, c1, c2):
    """det([c0 c1 c2]) for column vectors with shape (..., 3)."""
    return (
        c0[..., 0] * (c1[..., 1] * c2[..., 2] - c2[..., 1] * c1[..., 2])
        - c1[..., 0] * (c0[..., 1] * c2[..., 2] - c2[..., 1] * c0[..., 2])
        + c2[..., 0] * (c0[..., 1] * c1[..., 2] - c1[..., 1] * c0[..., 2])
    )


def pencil_det_coeffs(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Coefficients of det(M - lam N) for (..., 3, 3) matrices.

    Each power of ``lam`` collects the determinants with a subset of the
    columns of ``M`` replaced by the matching columns of ``N``.
    """
    m = [M[..., :, k] for k in range(3)]
    n = [N[..., :, k] for k in range(3)]
    c0 = _det3_cols(m[0], m[1], m[2])
    c1 = -(_det3_cols(n[0], m[1], m[2]) + _det3_cols(m[0], n[1], m[2]) + _det3_cols(m[0], m[1], n[2]))
    c2 = _det3_cols(m[0], n[1], n[2]) + _det3_cols(n[0], m[1], n[2]) + _det3_cols(n[0], n[1], m[2])
    c3 = -_det3_cols(n[0], n[1], n[2])
    return np.stack([c0, c1, c2, c3], axis=-1)


def _minor_coeffs(M, N, rows, cols):
    """Quadratic coefficients of the 2x2 minor of (M - lam N)."""
    (r0, r1), (k0, k1) = rows, cols
    p, q = M[..., r0, k0], N[..., r0, k0]
    s, t = M[..., r1, k1], N[..., r1, k1]
    u, x = M[..., r0, k1], N[..., r0, k1]
    y, z = M[..., r1, k0], N[..., r1, k0]
    # (p - lam q)(s - lam t) - (u - lam x)(y - lam z)
    return (p * s - u * y, -(p * t + q * s) + (u * z + x * y), q * t - x * z)


def adjugate_coeffs(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    """adj(M - lam N) as quadratic coefficients, shape (..., 3, 3, 3)."""
    shape = M.shape[:-2] + (3, 3, 3)
    out = np.empty(shape)
    for i in range(3):
        for j in range(3):
            # adj[i, j] = (-1)^(i+j) * minor with row j and column i removed
            rows = tuple(r for r in range(3) if r != j)
            cols = tuple(k for k in range(3) if k != i)
            sign = -1.0 if (i + j) % 2 else 1.0
            c = _minor_coeffs(M, N, rows, cols)
            for k in range(3):
                out[..., i, j, k] = sign * c[k]
    return out


def _numerator_row(M, N, r, s, i):
    """Coefficients of component ``i`` of -adj(M - lam N)(r - lam s).

    Only the minors of columns != i enter, so the result never touches the
    column that component ``i`` multiplies.
    """
    acc = np.zeros(M.shape[:-2] + (4,))
    for j in range(3):
        rows = tuple(x for x in range(3) if x != j)
        cols = tuple(k for k in range(3) if k != i)
        sign = -1.0 if (i + j) % 2 else 1.0
        m0, m1, m2 = _minor_coeffs(M, N, rows, cols)
        rj, sj = r[..., j], s[..., j]
        # -(sign * minor) * (rj - lam sj)
        acc[..., 0] -= sign * (m0 * rj)
        acc[..., 1] -= sign * (m1 * rj - m0 * sj)
        acc[..., 2] -= sign * (m2 * rj - m1 * sj)
        acc[..., 3] -= sign * (-m2 * sj)
    return acc


def reduce_at(vv: np.ndarray, ww: np.ndarray, k: int):
    """System matrices with barycentric coordinate ``k`` eliminated.

    Returns (A, B, a, b) where the columns of A are v_i - v_k over the other
    three vertices in ascending order, and a = v_k.
    """
    others = [i for i in range(4) if i != k]
    A = np.stack([vv[..., i, :] - vv[..., k, :] for i in others], axis=-1)
    B = np.stack([ww[..., i, :] - ww[..., k, :] for i in others], axis=-1)
    return A, B, vv[..., k, :], ww[..., k, :]


def tet_polynomial_coeffs(vv: np.ndarray, ww: np.ndarray) -> np.ndarray:
    """Batched [Q, P0, P1, P2, P3] coefficients, shape (..., 5, 4).

    ``vv`` and ``ww`` have shape (..., 4, 3): four vertex vectors per cell.
    P0..P2 come from the system reduced at vertex 3.  P3 is the pencil
    determinant of the face (0, 1, 2), computed exactly like
    ``triangle_characteristic``; each P_i is thus assembled from the other
    three vertices only.
    """
    vv = np.asarray(vv, dtype=float)
    ww = np.asarray(ww, dtype=float)
    A, B, a, b = reduce_at(vv, ww, 3)
    out = np.empty(vv.shape[:-2] + (5, 4))
    out[..., 0, :] = pencil_det_coeffs(A, B)
    for i in range(3):
        out[..., 1 + i, :] = _numerator_row(A, B, a, b, i)
    out[..., 4, :] = pencil_det_coeffs(np.swapaxes(vv[..., :3, :], -1, -2), np.swapaxes(ww[..., :3, :], -1, -2))
    return out


def build_system(v, w) -> EigenSystem:
    """System matrices for one tetrahedron from (4, 3) vertex arrays."""
    vv = np.array(v, dtype=float).reshape(4, 3)
    ww = np.array(w, dtype=float).reshape(4, 3)
    _check_finite(vv, ww)
    A, B, a, b = reduce_at(vv, ww, 3)
    return EigenSystem(A=A, B=B, a=a.copy(), b=b.copy(), v=vv, w=ww)


def denominator(sys: EigenSystem) -> CubicPolynomial:
    return CubicPolynomial.from_coeffs(pencil_det_coeffs(sys.A, sys.B))


def _negligible(coeffs, sv: float, sw: float) -> bool:
    # coefficient k is homogeneous of degree 3-k in v and k in w
    bounds = [EPS_ZERO_REL * sv ** (3 - k) * sw ** k for k in range(4)]
    return all(abs(c) <= max(bnd, 1e-300) for c, bnd in zip(coeffs, bounds))


def classify(coeffs: np.ndarray, sv: float, sw: float) -> Degeneracy:
    """Degeneracy of a cell from its (5, 4) coefficient block and field scales."""
    if not _negligible(coeffs[0], sv, sw):
        return Degeneracy.NONE
    if all(_negligible(c, sv, sw) for c in coeffs[1:]):
        return Degeneracy.ZERO_EVERYTHING
    return Degeneracy.ZERO_Q


def polynomials_from_coeffs(coeffs: np.ndarray, vv=None, ww=None) -> TetPolynomials:
    Q = CubicPolynomial.from_coeffs(coeffs[0])
    P = tuple(CubicPolynomial.from_coeffs(c) for c in coeffs[1:])
    if vv is None:
        flag = classify(coeffs, 1.0, 1.0) if Q.is_zero() else Degeneracy.NONE
    else:
        flag = classify(coeffs, float(np.abs(vv).max()), float(np.abs(ww).max()))
    return TetPolynomials(Q=Q, P=P, degenerate_flag=flag)


def numerators(sys: EigenSystem) -> TetPolynomials:
    return polynomials_from_coeffs(tet_polynomial_coeffs(sys.v, sys.w), sys.v, sys.w)


def tet_polynomials(v, w) -> TetPolynomials:
    """Shortcut: build the system from vertex values and expand all polynomials."""
    return numerators(build_system(v, w))


def triangle_characteristic(v, w) -> CubicPolynomial:
    """det(V - lam W) for a triangle, V and W holding the vertex vectors as columns.

    With this sign convention the polynomial of face (0, 1, 2) of a
    tetrahedron is identical to that tetrahedron's P3, so its roots are the
    parameters at which the curve meets the face plane.  The constant term
    is det(V) and the cubic term is -det(W).
    """
    vv = np.array(v, dtype=float).reshape(3, 3)
    ww = np.array(w, dtype=float).reshape(3, 3)
    _check_finite(vv, ww)
    return CubicPolynomial.from_coeffs(pencil_det_coeffs(vv.T, ww.T))


def _affine_null_point(M: np.ndarray, eps_null: float):
    """The unique mu with M mu = 0 and sum(mu) = 1, or None if there is none.

    Returns ``(mu, ratio)`` where ``ratio`` is the smallest singular value
    relative to the largest.  A null space of dimension two or more that
    still meets the plane sum(mu) = 1 means a whole line of solutions and
    raises ``DegenerateFace``.
    """
    u, s, vt = np.linalg.svd(M)
    if s[0] == 0.0:
        raise DegenerateFace("matrix vanishes at the root")
    # the last singular vector is taken even when rounding left s[2] above the cut
    rank = min(2, int(np.sum(s > eps_null * s[0])))
    basis = vt[rank:]
    sums = basis.sum(axis=1)
    if len(basis) > 1:
        if np.max(np.abs(sums)) > 1e-8 * np.sqrt(3.0):
            raise DegenerateFace(f"null space of dimension {len(basis)} (singular values {s})")
        return None, s[2] / s[0]
    total = sums[0]
    if abs(total) <= 1e-300 or not np.isfinite(total):
        return None, s[2] / s[0]
    return basis[0] / total, s[2] / s[0]


def solve_face_points(v, w, poly: CubicPolynomial | None = None, eps_bary: float = EPS_BARY,
                      eps_null: float = EPS_NULL) -> list:
    """Parallel-vector points on a triangle.

    Returns ``(lam, mu)`` pairs with ``mu`` the barycentric coordinates
    (clamped to [0, 1], summing to one).  A root at infinity (degree drop of
    the characteristic polynomial) is a zero of ``w`` and is reported with
    ``lam = inf``.
    """
    vv = np.array(v, dtype=float).reshape(3, 3)
    ww = np.array(w, dtype=float).reshape(3, 3)
    if poly is None:
        poly = triangle_characteristic(vv, ww)
    if poly.is_zero():
        raise DegenerateFace("characteristic polynomial vanishes identically")
    V, W = vv.T, ww.T
    candidates = [(r.value, V - r.value * W) for r in real_roots(poly)]
    if poly.effective_degree() < 3 and np.any(W != 0.0):
        candidates.append((np.inf, W))
    points = []
    for lam, M in candidates:
        mu, ratio = _affine_null_point(M, eps_null)
        if mu is None or (np.isinf(lam) and ratio > 1e-8):
            continue
        if np.all(mu >= -eps_bary) and np.all(mu <= 1.0 + eps_bary):
            mu = np.clip(mu, 0.0, 1.0)
            points.append((float(lam), mu / mu.sum()))
    return points
