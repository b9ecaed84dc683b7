"""Readers and writers for the command-line file formats.

Raw grid
    A 60-byte little-endian header file: three uint32 dims (nx, ny, nz),
    three float64 spacings, three float64 origin coordinates.  Each field is
    a separate data file of nx*ny*nz*3 float64 values, x index fastest.

ASCII mesh
    Whitespace separated, ``#`` starts a comment::

        <vertex count>
        x y z                      (one line per vertex)
        <tet count>
        i j k l                    (zero-based vertex ids)
        <field count>
        fx fy fz                   (vertex count lines per field)

Polylines
    ``curves <n>`` then for every curve ``curve <point count> <open|closed>``
    followed by ``x y z lam tet_id`` lines.  Floats are written with ``repr``
    so they read back bitwise.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

HEADER = struct.Struct("<3I3d3d")


class FormatError(ValueError):
    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = path
        self.offset = offset


@dataclass(frozen=True)
class GridHeader:
    dims: tuple
    spacing: tuple
    origin: tuple

    @property
    def n_points(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


def read_grid_header(path) -> GridHeader:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER.size:
        raise FormatError(path, len(raw), f"header truncated, expected {HEADER.size} bytes")
    if len(raw) > HEADER.size:
        raise FormatError(path, HEADER.size, "unexpected bytes after header")
    vals = HEADER.unpack(raw)
    dims, spacing, origin = vals[:3], vals[3:6], vals[6:]
    if min(dims) < 2:
        raise FormatError(path, 0, f"grid dims must be >= 2, got {dims}")
    if not all(math.isfinite(x) for x in spacing + origin):
        raise FormatError(path, 12, "non-finite spacing or origin")
    if min(spacing) <= 0:
        raise FormatError(path, 12, f"spacing must be positive, got {spacing}")
    return GridHeader(tuple(dims), tuple(spacing), tuple(origin))


def read_grid_field(path, header: GridHeader) -> np.ndarray:
    want = header.n_points * 3 * 8
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) != want:
        offset = min(len(raw), want)
        raise FormatError(path, offset, f"expected {want} bytes of float64 data, found {len(raw)}")
    arr = np.frombuffer(raw, dtype="<f8").reshape(-1, 3).astype(float)
    bad = np.nonzero(~np.isfinite(arr).all(axis=1))[0]
    if len(bad):
        raise FormatError(path, int(bad[0]) * 24, f"non-finite vector at grid point {int(bad[0])}")
    return arr


def write_grid(header_path, header: GridHeader, field_paths=(), fields=()):
    with open(header_path, "wb") as fh:
        fh.write(HEADER.pack(*header.dims, *header.spacing, *header.origin))
    for path, values in zip(field_paths, fields):
        arr = np.ascontiguousarray(values, dtype="<f8").reshape(header.n_points, 3)
        with open(path, "wb") as fh:
            fh.write(arr.tobytes())


class _Tokens:
    """Whitespace tokens of a text file with their byte offsets."""

    def __init__(self, path):
        self.path = path
        with open(path, "rb") as fh:
            data = fh.read()
        self.size = len(data)
        self.items = []
        pos = 0
        for line in data.splitlines(keepends=True):
            body = line.split(b"#", 1)[0]
            k = 0
            for tok in body.split():
                k = body.index(tok, k)
                self.items.append((tok.decode("ascii", "replace"), pos + k))
                k += len(tok)
            pos += len(line)
        self.k = 0

    def _next(self, what):
        if self.k >= len(self.items):
            raise FormatError(self.path, self.size, f"unexpected end of file, expected {what}")
        tok = self.items[self.k]
        self.k += 1
        return tok

    def int(self, what, lo=0):
        tok, off = self._next(what)
        try:
            val = int(tok)
        except ValueError:
            raise FormatError(self.path, off, f"expected integer {what}, got {tok!r}") from None
        if val < lo:
            raise FormatError(self.path, off, f"{what} must be >= {lo}, got {val}")
        return val

    def float(self, what):
        tok, off = self._next(what)
        try:
            val = float(tok)
        except ValueError:
            raise FormatError(self.path, off, f"expected number {what}, got {tok!r}") from None
        if not math.isfinite(val):
            raise FormatError(self.path, off, f"non-finite {what}")
        return val

    def offset(self):
        return self.items[self.k][1] if self.k < len(self.items) else self.size

    def done(self):
        if self.k < len(self.items):
            raise FormatError(self.path, self.items[self.k][1], "trailing data")


def read_ascii_mesh(path):
    """Returns ``(vertices, tets, fields)``."""
    tk = _Tokens(path)
    nv = tk.int("vertex count", 1)
    vertices = np.array([[tk.float("coordinate") for _ in range(3)] for _ in range(nv)])
    nt = tk.int("tet count", 1)
    tets = np.empty((nt, 4), dtype=np.int64)
    for t in range(nt):
        for c in range(4):
            off = tk.offset()
            idx = tk.int("vertex id")
            if idx >= nv:
                raise FormatError(path, off, f"tet {t} references vertex {idx} of {nv}")
            tets[t, c] = idx
    nf = tk.int("field count")
    fields = []
    for _ in range(nf):
        fields.append(np.array([[tk.float("field component") for _ in range(3)] for _ in range(nv)]))
    tk.done()
    return vertices, tets, fields


def _num(x) -> str:
    return repr(float(x))


def write_ascii_mesh(path, vertices, tets, fields=()):
    lines = [str(len(vertices))]
    lines += [" ".join(_num(c) for c in p) for p in vertices]
    lines.append(str(len(tets)))
    lines += [" ".join(str(int(i)) for i in t) for t in tets]
    lines.append(str(len(fields)))
    for f in fields:
        lines += [" ".join(_num(c) for c in row) for row in f]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_polylines(path, curves):
    """``curves`` holds (points, lam, tet_ids, closed) tuples."""
    with open(path, "w") as fh:
        fh.write(f"curves {len(curves)}\n")
        for points, lam, tets, closed in curves:
            fh.write(f"curve {len(points)} {'closed' if closed else 'open'}\n")
            for p, x, t in zip(points, lam, tets):
                fh.write(f"{_num(p[0])} {_num(p[1])} {_num(p[2])} {_num(x)} {int(t)}\n")


def read_polylines(path):
    tk = _Tokens(path)
    tok, off = tk._next("'curves'")
    if tok != "curves":
        raise FormatError(path, off, f"expected 'curves', got {tok!r}")
    n = tk.int("curve count")
    out = []
    for _ in range(n):
        tok, off = tk._next("'curve'")
        if tok != "curve":
            raise FormatError(path, off, f"expected 'curve', got {tok!r}")
        count = tk.int("point count")
        kind, off = tk._next("open/closed")
        if kind not in ("open", "closed"):
            raise FormatError(path, off, f"expected open or closed, got {kind!r}")
        pts = np.empty((count, 3))
        lam = np.empty(count)
        tets = np.empty(count, dtype=np.int64)
        for k in range(count):
            pts[k] = [tk.float("coordinate") for _ in range(3)]
            tok, off = tk._next("lambda")
            try:
                lam[k] = float(tok)
            except ValueError:
                raise FormatError(path, off, f"expected lambda, got {tok!r}") from None
            tets[k] = tk.int("tet id")
        out.append((pts, lam, tets, kind == "closed"))
    tk.done()
    return out


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
