"""Command-line front end: ``pvcurves extract | verify | tessellate-info``.

Exit codes: 0 success, 1 I/O or format error, 2 too many degenerate cells,
3 verification disagreed with the extractor.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .extraction import EPS_MATCH, MAX_CHORD_ERROR, Tolerances, extract
from .fileio import (
    FormatError,
    read_ascii_mesh,
    read_grid_field,
    read_grid_header,
    write_jsonl,
    write_polylines,
)
from .mesh import DegenerateCell, NonManifold, TetMesh, sujudi_haimes_field, tessellate_grid
from .oracle import RESIDUAL_THRESHOLD, Verdict, verify_segments
from .polynomial import EPS_ROOT

log = logging.getLogger("pvcurves")

EXIT_OK, EXIT_IO, EXIT_DEGENERATE, EXIT_DISAGREE = 0, 1, 2, 3


@dataclass(frozen=True)
class JobConfig:
    v: str
    w: str | None = None
    derive: str | None = None
    mesh: str | None = None
    grid: str | None = None
    out: str | None = None
    diag: str | None = None
    report: str | None = None
    workers: int = 1
    eps_root: float = EPS_ROOT
    eps_match: float = EPS_MATCH
    max_chord_error: float = MAX_CHORD_ERROR
    residual_threshold: float = RESIDUAL_THRESHOLD
    max_degenerate_fraction: float = 0.5
    sample: int = 100
    grid_n: int = 40
    seed: int = 0
    fault: str | None = None

    def __post_init__(self):
        if (self.w is None) == (self.derive is None):
            raise ValueError("give exactly one of --w and --derive")
        if (self.mesh is None) == (self.grid is None):
            raise ValueError("give exactly one of --mesh and --grid")
        for name in ("eps_root", "eps_match", "max_chord_error", "residual_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"--{name.replace('_', '-')} must be positive")
        if self.workers < 1:
            raise ValueError("--workers must be >= 1")
        if self.grid_n < 10:
            raise ValueError("--grid-n must be >= 10")

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances(eps_root=self.eps_root, eps_match=self.eps_match,
                          max_chord_error=self.max_chord_error)


def load_inputs(cfg: JobConfig):
    """Mesh and the v, w vertex fields described by ``cfg``."""
    if cfg.grid is not None:
        header = read_grid_header(cfg.grid)
        v = read_grid_field(cfg.v, header)
        w = None if cfg.w is None else read_grid_field(cfg.w, header)
        mesh, = tessellate_grid(header.dims, header.spacing, header.origin)
    else:
        vertices, tets, fields = read_ascii_mesh(cfg.mesh)
        mesh = TetMesh(vertices, tets)

        def pick(tag):
            try:
                return fields[int(tag)]
            except (ValueError, IndexError):
                raise FormatError(cfg.mesh, 0, f"no field {tag!r} ({len(fields)} fields in file)") from None

        v = pick(cfg.v)
        w = None if cfg.w is None else pick(cfg.w)
    if cfg.derive is not None:
        if cfg.derive != "sujudi-haimes":
            raise ValueError(f"unknown derivation {cfg.derive!r}")
        w = sujudi_haimes_field(mesh, v)
    return mesh, v, w


def _curve_rows(result):
    return [(c.polyline.points, c.polyline.lam, c.polyline.tet_ids, c.closed) for c in result.curves]


def _diag_records(result):
    recs = [{"kind": d.kind, "id": d.id, "detail": d.detail} for d in result.diagnostics]
    counts = Counter(d.kind for d in result.diagnostics)
    recs.append({
        "kind": "summary",
        "id": -1,
        "detail": "",
        "tets": result.mesh.n_tets,
        "faces": result.mesh.n_faces,
        "labeled_tets": int(len(result.processed_tets)),
        "segments": len(result.segments),
        "curves": len(result.curves),
        "degenerate_cells": len(result.degenerate_cells()),
        "branch_histogram": {str(k): v for k, v in result.branch_histogram.items()},
        "diagnostic_counts": dict(sorted(counts.items())),
    })
    return recs


def _degenerate_status(cfg, result) -> int:
    cells = result.degenerate_cells()
    fraction = len(cells) / max(1, result.mesh.n_tets)
    if cells and fraction > cfg.max_degenerate_fraction:
        shown = ", ".join(str(c) for c in cells[:10])
        more = " ..." if len(cells) > 10 else ""
        print(f"error: {len(cells)} of {result.mesh.n_tets} cells are degenerate "
              f"(fraction {fraction:.3g} > {cfg.max_degenerate_fraction}); cells {shown}{more}",
              file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def run_extract(cfg: JobConfig) -> int:
    mesh, v, w = load_inputs(cfg)
    result = extract(mesh, v, w, workers=cfg.workers, tol=cfg.tolerances)
    if cfg.out:
        write_polylines(cfg.out, _curve_rows(result))
    if cfg.diag:
        write_jsonl(cfg.diag, _diag_records(result))
    log.info("%d segments, %d curves, %d diagnostics", len(result.segments), len(result.curves),
             len(result.diagnostics))
    return _degenerate_status(cfg, result)


def _chord(seg) -> float:
    ends = [p.position for p in seg.endpoints if p is not None]
    return float(np.linalg.norm(ends[0] - ends[1])) if len(ends) == 2 else 0.0


def run_verify(cfg: JobConfig) -> int:
    mesh, v, w = load_inputs(cfg)
    result = extract(mesh, v, w, workers=cfg.workers, tol=cfg.tolerances)
    segments = list(result.segments)
    if cfg.fault == "drop-segment" and segments:
        # test hook: simulate an extractor that loses a branch
        segments.pop(max(range(len(segments)), key=lambda k: _chord(segments[k])))
    with_segments = sorted({s.tet_id for s in result.segments})
    rng = np.random.default_rng(cfg.seed)
    others = np.setdiff1d(np.arange(mesh.n_tets), with_segments)
    n_extra = max(0, min(len(others), cfg.sample - len(with_segments)))
    extra = rng.choice(others, size=n_extra, replace=False) if n_extra else []
    chosen = sorted(set(with_segments[:cfg.sample]) | {int(t) for t in extra})
    report = verify_segments(mesh, v, w, segments, grid_n=cfg.grid_n, tet_ids=chosen,
                             threshold=cfg.residual_threshold, case_id="verify")
    rec = report.as_dict()
    rec["cells_checked"] = len(chosen)
    if cfg.report:
        with open(cfg.report, "w") as fh:
            json.dump(rec, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if cfg.out:
        write_polylines(cfg.out, _curve_rows(result))
    if cfg.diag:
        write_jsonl(cfg.diag, _diag_records(result))
    print(f"verdict: {report.verdict.value} ({len(chosen)} cells, "
          f"{report.unmatched_clusters} unmatched clusters, {report.unmatched_segments} unmatched segments)")
    if report.verdict is Verdict.DISAGREE:
        return EXIT_DISAGREE
    return _degenerate_status(cfg, result)


def run_info(args) -> int:
    if args.grid:
        header = read_grid_header(args.grid)
        mesh, = tessellate_grid(header.dims, header.spacing, header.origin)
        print(f"dims {header.dims} spacing {header.spacing} origin {header.origin}")
    else:
        vertices, tets, fields = read_ascii_mesh(args.mesh)
        mesh = TetMesh(vertices, tets)
        print(f"fields {len(fields)}")
    boundary = int(np.sum(mesh.face_tets[:, 1] < 0))
    print(f"vertices {mesh.n_vertices}")
    print(f"tets {mesh.n_tets}")
    print(f"faces {mesh.n_faces} (boundary {boundary})")
    print(f"diameter {mesh.diameter()!r}")
    return EXIT_OK


def _add_job_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--grid", help="raw grid header file (60 bytes)")
    src.add_argument("--mesh", help="ASCII tetrahedral mesh file")
    p.add_argument("--v", required=True, help="v field: raw data file (grid) or field index (mesh)")
    wsrc = p.add_mutually_exclusive_group(required=True)
    wsrc.add_argument("--w", help="w field: raw data file (grid) or field index (mesh)")
    wsrc.add_argument("--derive", choices=["sujudi-haimes"], help="derive w from v")
    p.add_argument("--out", help="polyline output file")
    p.add_argument("--diag", help="diagnostics output file (JSON lines)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--eps-root", type=float, default=EPS_ROOT)
    p.add_argument("--eps-match", type=float, default=EPS_MATCH)
    p.add_argument("--max-chord-error", type=float, default=MAX_CHORD_ERROR,
                   help="polyline chord tolerance relative to the mesh diameter")
    p.add_argument("--max-degenerate-fraction", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvcurves", description="Exact parallel-vector curve extraction.")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract curves and write polylines")
    _add_job_args(p)

    p = sub.add_parser("verify", help="extract, then check against dense sampling")
    _add_job_args(p)
    p.add_argument("--report", help="oracle report output (JSON)")
    p.add_argument("--residual-threshold", type=float, default=RESIDUAL_THRESHOLD)
    p.add_argument("--sample", type=int, default=100, help="number of cells to check")
    p.add_argument("--grid-n", type=int, default=40, help="barycentric samples per edge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", dest="fault", choices=["drop-segment"], help=argparse.SUPPRESS)

    p = sub.add_parser("tessellate-info", help="print mesh statistics")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--grid")
    src.add_argument("--mesh")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.command == "tessellate-info":
            return run_info(args)
        opts = {k: v for k, v in vars(args).items() if k in JobConfig.__dataclass_fields__}
        cfg = JobConfig(**opts)
        if args.command == "extract":
            return run_extract(cfg)
        return run_verify(cfg)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, DegenerateCell, NonManifold) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
