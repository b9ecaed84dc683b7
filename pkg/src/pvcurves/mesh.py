"""Tetrahedral meshes, piecewise-linear vertex fields and grid tessellation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


class BadBarycentric(ValueError):
    pass


class BadDims(ValueError):
    pass


class DegenerateCell(ValueError):
    pass


class NonManifold(ValueError):
    pass


def signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    e1, e2, e3 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", np.cross(e1, e2), e3) / 6.0


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Immutable tetrahedral mesh with a canonical face table.

    ``tets`` are reoriented on construction so every cell has positive
    signed volume.  ``tet_faces[t, i]`` is the face opposite local vertex
    ``i`` and ``face_tets[f]`` lists the one or two incident cells (-1 pads
    boundary faces).
    """

    vertices: np.ndarray
    tets: np.ndarray
    faces: np.ndarray = field(init=False)
    face_tets: np.ndarray = field(init=False)
    tet_faces: np.ndarray = field(init=False)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        tets = np.array(self.tets, dtype=np.int64).reshape(-1, 4)
        if tets.size and (tets.min() < 0 or tets.max() >= len(vertices)):
            raise ValueError("tet references a vertex out of range")
        vol = signed_volumes(vertices, tets) if len(tets) else np.zeros(0)
        flip = vol < 0
        tets[flip] = tets[flip][:, [1, 0, 2, 3]]

        n = len(tets)
        opposite = np.empty((n, 4, 3), dtype=np.int64)
        for i in range(4):
            opposite[:, i] = np.sort(np.delete(tets, i, axis=1), axis=1)
        flat = opposite.reshape(-1, 3)
        faces, inverse, counts = np.unique(flat, axis=0, return_inverse=True, return_counts=True)
        if len(counts) and counts.max() > 2:
            raise NonManifold("a face is shared by more than two tetrahedra")
        inverse = inverse.reshape(-1)
        face_tets = np.full((len(faces), 2), -1, dtype=np.int64)
        owner = np.repeat(np.arange(n), 4)
        order = np.argsort(inverse, kind="stable")
        starts = np.searchsorted(inverse[order], np.arange(len(faces)))
        face_tets[:, 0] = owner[order][starts]
        pair = counts == 2
        face_tets[pair, 1] = owner[order][starts[pair] + 1]
        for arr in (vertices, tets, faces, face_tets):
            arr.setflags(write=False)
        tet_faces = inverse.reshape(n, 4)
        tet_faces.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "tets", tets)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "face_tets", face_tets)
        object.__setattr__(self, "tet_faces", tet_faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def is_boundary_face(self, face_id: int) -> bool:
        return self.face_tets[face_id, 1] == -1

    def volumes(self) -> np.ndarray:
        return signed_volumes(self.vertices, self.tets)

    def diameter(self) -> float:
        if not len(self.vertices):
            return 0.0
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def local_face(self, tet_id: int, face_id: int) -> int:
        """Local index of the vertex opposite ``face_id`` in ``tet_id``."""
        hits = np.nonzero(self.tet_faces[tet_id] == face_id)[0]
        if not len(hits):
            raise KeyError(f"face {face_id} is not a face of tet {tet_id}")
        return int(hits[0])


def check_field(mesh: TetMesh, values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=float)
    if arr.shape != (mesh.n_vertices, 3):
        raise ValueError(f"field shape {arr.shape} does not match {mesh.n_vertices} vertices")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    return arr


def interpolate(mesh: TetMesh, field, tet_id: int, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (4,) or np.any(mu < -1e-12) or np.any(mu > 1 + 1e-12) or abs(mu.sum() - 1) > 1e-12:
        raise BadBarycentric(f"not a barycentric point: {mu}")
    values = np.asarray(field)[mesh.tets[tet_id]]
    return mu @ values


def embed(mesh: TetMesh, tet_id: int, mu) -> np.ndarray:
    return np.asarray(mu, dtype=float) @ mesh.vertices[mesh.tets[tet_id]]


def _freudenthal_offsets():
    """Corner offsets of the six tetrahedra sharing the cube's main diagonal."""
    out = []
    for perm in itertools.permutations(range(3)):
        corner = np.zeros(3, dtype=np.int64)
        path = [corner.copy()]
        for axis in perm:
            corner[axis] += 1
            path.append(corner.copy())
        out.append(path)
    return np.array(out)  # (6, 4, 3)


def grid_vertex_index(i, j, k, dims):
    nx, ny, _ = dims
    return i + nx * (j + ny * k)


def _flatten_grid_field(values, dims) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    n = dims[0] * dims[1] * dims[2]
    if arr.shape == (dims[0], dims[1], dims[2], 3):
        return np.ascontiguousarray(arr.transpose(2, 1, 0, 3).reshape(n, 3))
    if arr.shape == (n, 3):
        return arr
    raise ValueError(f"grid field shape {arr.shape} does not match dims {dims}")


def tessellate_grid(dims, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0), *fields_on_grid):
    """Split every grid cube into six tetrahedra around its (0,0,0)-(1,1,1) diagonal.

    Every cube uses the same diagonal direction, so the quad faces shared by
    neighbouring cubes are cut identically from both sides.  Vertex order is
    x-fastest.  Fields may be given as (nx, ny, nz, 3) arrays or flat (N, 3)
    arrays in x-fastest order; they are returned flat, after the mesh.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 2:
        raise BadDims(f"grid dims must be >= 2 on each axis, got {dims}")
    nx, ny, nz = dims
    spacing = np.asarray(spacing, dtype=float)
    origin = np.asarray(origin, dtype=float)
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    ijk = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)
    vertices = origin + ijk * spacing

    ck, cj, ci = np.meshgrid(np.arange(nz - 1), np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
    base = np.stack([ci.ravel(), cj.ravel(), ck.ravel()], axis=1)
    offsets = _freudenthal_offsets()
    corners = base[:, None, None, :] + offsets[None]  # (cells, 6, 4, 3)
    ids = grid_vertex_index(corners[..., 0], corners[..., 1], corners[..., 2], dims)
    tets = ids.reshape(-1, 4)
    mesh = TetMesh(vertices, tets)
    flat = [_flatten_grid_field(f, dims) for f in fields_on_grid]
    return (mesh, *flat)


def cell_jacobians(mesh: TetMesh, values: np.ndarray) -> np.ndarray:
    """Constant gradient d(value)/dx of the linear interpolant in every cell."""
    p = mesh.vertices[mesh.tets]
    f = values[mesh.tets]
    dx = np.stack([p[:, k] - p[:, 0] for k in (1, 2, 3)], axis=1)  # rows are edges
    df = np.stack([f[:, k] - f[:, 0] for k in (1, 2, 3)], axis=1)
    det = np.linalg.det(dx)
    bad = np.nonzero(np.abs(det) <= 1e-14 * np.abs(dx).max(axis=(1, 2)) ** 3)[0]
    if len(bad):
        raise DegenerateCell(f"zero-volume tetrahedron {int(bad[0])} in Jacobian stencil")
    # dx @ G^T = df  ->  G^T = solve(dx, df)
    return np.transpose(np.linalg.solve(dx, df), (0, 2, 1))


def sujudi_haimes_field(mesh: TetMesh, v) -> np.ndarray:
    """Vertex field w = (grad v) v for the vortex-core criterion v || w.

    The Jacobian at a vertex is the volume-weighted mean of the constant
    Jacobians of its incident cells; w is then linearly interpolated like v.
    """
    v = check_field(mesh, v)
    jac = cell_jacobians(mesh, v)
    vol = np.abs(mesh.volumes())
    acc = np.zeros((mesh.n_vertices, 3, 3))
    weight = np.zeros(mesh.n_vertices)
    for local in range(4):
        np.add.at(acc, mesh.tets[:, local], jac * vol[:, None, None])
        np.add.at(weight, mesh.tets[:, local], vol)
    used = weight > 0
    acc[used] /= weight[used, None, None]
    return np.einsum("nij,nj->ni", acc, v)
