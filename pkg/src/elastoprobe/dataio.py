"""Far-field dataset files, indicator-field export, deterministic formats.

A far-field dataset is a directory holding one raw binary file per block
(complex128 as little-endian float64 pairs, row-major over
[incidence][d][xhat][component]) and a ``metadata.json`` carrying version,
medium constants, grid specs, shapes, checksums and provenance.  Reading
validates sizes, checksums and the polarization invariants of the blocks, so
externally produced data (e.g. penetrable-obstacle far fields) is accepted
exactly when it satisfies the same structural contract.

All writers are deterministic: fixed key order, fixed float formatting, no
timestamps, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import FarFieldMatrix
from .geometry import s2_quadrature
from .medium import ElasticMedium
from .probe import IndicatorField

FORMAT_VERSION = 1
_BLOCK_NAMES = ("upp", "usp", "ups", "uss")


class DatasetFormatError(ValueError):
    """A dataset directory violates the file-format contract."""


@dataclass(frozen=True)
class FarFieldFileSet:
    """Paths and checksums of one serialized far-field dataset."""

    directory: Path
    metadata_path: Path
    block_paths: dict
    checksums: dict


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_farfield(F: FarFieldMatrix, directory) -> FarFieldFileSet:
    """Serialize a far-field matrix; the round trip is bit-exact."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    block_paths, checksums, blocks_meta = {}, {}, {}
    for name in _BLOCK_NAMES:
        arr = np.ascontiguousarray(getattr(F, name)).astype("<c16")
        raw = arr.tobytes()
        digest = hashlib.sha256(raw).hexdigest()
        path = directory / f"{name}.bin"
        path.write_bytes(raw)
        block_paths[name] = path
        checksums[name] = digest
        blocks_meta[name] = {"file": f"{name}.bin", "shape": list(arr.shape), "sha256": digest}
    meta = {
        "version": FORMAT_VERSION,
        "kind": "farfield",
        "medium": {"lambda0": F.medium.lambda0, "mu0": F.medium.mu0, "kappa": F.medium.kappa},
        "d_grid": {"n_theta": F.d_grid.n_theta, "n_phi": F.d_grid.n_phi},
        "xhat_grid": {"n_theta": F.xhat_grid.n_theta, "n_phi": F.xhat_grid.n_phi},
        "blocks": blocks_meta,
        "provenance": F.provenance,
    }
    meta_path = directory / "metadata.json"
    _dump_json(meta, meta_path)
    return FarFieldFileSet(directory=directory, metadata_path=meta_path,
                           block_paths=block_paths, checksums=checksums)


def read_farfield(directory, polarization_tol: float = 1e-6) -> FarFieldMatrix:
    """Load and validate a far-field dataset directory.

    Rejects version or size mismatches, checksum failures, and any block
    violating the polarization invariants (P samples parallel to xhat, S
    samples tangential) beyond ``polarization_tol``; the error names the
    offending block and indices.
    """
    directory = Path(directory)
    meta_path = directory / "metadata.json"
    if not meta_path.is_file():
        raise DatasetFormatError(f"missing metadata.json in {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format version {meta.get('version')!r}")
    medium = ElasticMedium(**meta["medium"])
    d_grid = s2_quadrature(**meta["d_grid"])
    xhat_grid = s2_quadrature(**meta["xhat_grid"])

    expected = {
        "upp": (len(d_grid), len(xhat_grid), 3),
        "usp": (len(d_grid), len(xhat_grid), 3),
        "ups": (3, len(d_grid), len(xhat_grid), 3),
        "uss": (3, len(d_grid), len(xhat_grid), 3),
    }
    blocks = {}
    for name in _BLOCK_NAMES:
        info = meta["blocks"].get(name)
        if info is None:
            raise DatasetFormatError(f"metadata lacks block {name!r}")
        shape = tuple(info["shape"])
        if shape != expected[name]:
            raise DatasetFormatError(
                f"block {name!r} declares shape {shape}, grids require {expected[name]}"
            )
        raw = (directory / info["file"]).read_bytes()
        n_expected = int(np.prod(shape)) * 16
        if len(raw) != n_expected:
            raise DatasetFormatError(
                f"block {name!r} payload has {len(raw)} bytes, expected {n_expected}"
            )
        if hashlib.sha256(raw).hexdigest() != info["sha256"]:
            raise DatasetFormatError(f"block {name!r} fails its checksum")
        blocks[name] = np.frombuffer(raw, dtype="<c16").reshape(shape).astype(complex)

    F = FarFieldMatrix(
        medium=medium, d_grid=d_grid, xhat_grid=xhat_grid,
        provenance=meta.get("provenance", {}), **blocks,
    )
    bad = F.check_polarization(polarization_tol)
    if bad:
        details = "; ".join(f"{k}: first offenders {v[:5].tolist()}" for k, v in bad.items())
        raise DatasetFormatError(f"polarization invariants violated ({details})")
    return F


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def indicator_field_json(field: IndicatorField) -> dict:
    needles = []
    for n in field.needles:
        needles.append(
            {
                "needle_id": n.needle_id,
                "entry": [_fmt(v) for v in n.entry],
                "direction": [_fmt(v) for v in n.direction],
                "detected": [_fmt(v) for v in n.detected] if n.detected is not None else None,
                "exponent": (
                    {"slope": _fmt(n.exponent[0]), "r2": _fmt(n.exponent[1])} if n.exponent else None
                ),
                "samples": [
                    {
                        "y": [_fmt(v) for v in s.y],
                        "re": _fmt(s.value.real),
                        "im": _fmt(s.value.imag),
                        "flags": list(s.flags),
                        "density_info": {
                            k: (_fmt(v) if isinstance(v, float) else v)
                            for k, v in s.density_info.items()
                        },
                    }
                    for s in n.samples
                ],
            }
        )
    return {
        "kind": field.kind.value,
        "threshold": _fmt(field.threshold),
        "shell_stats": {k: (_fmt(v) if isinstance(v, float) else v) for k, v in field.shell_stats.items()},
        "needles": needles,
    }


def write_indicator_field(field: IndicatorField, path) -> None:
    _dump_json(indicator_field_json(field), Path(path))


def export_indicator(field: IndicatorField, path, fmt: str) -> Path:
    """Write an indicator field as CSV samples or legacy-VTK detected points.

    CSV columns: needle_id, depth, y1, y2, y3, re_I, im_I, abs_I, flags; 17
    significant digits so reparsing reproduces the values exactly.  An empty
    field produces a header-only file.
    """
    path = Path(path)
    if fmt == "csv":
        lines = ["needle_id,depth,y1,y2,y3,re_I,im_I,abs_I,flags"]
        for needle_id, depth, s in field.all_samples:
            lines.append(
                ",".join(
                    [
                        str(needle_id),
                        _fmt(depth),
                        _fmt(s.y[0]),
                        _fmt(s.y[1]),
                        _fmt(s.y[2]),
                        _fmt(s.value.real),
                        _fmt(s.value.imag),
                        _fmt(abs(s.value)),
                        ";".join(s.flags),
                    ]
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt in ("vtk", "vtk-legacy"):
        pts = field.detected_points
        lines = [
            "# vtk DataFile Version 3.0",
            "detected boundary points",
            "ASCII",
            "DATASET POLYDATA",
            f"POINTS {len(pts)} double",
        ]
        for p in pts:
            lines.append(" ".join(_fmt(v) for v in p))
        lines.append(f"VERTICES {len(pts)} {2 * len(pts)}")
        for i in range(len(pts)):
            lines.append(f"1 {i}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise DatasetFormatError(f"unknown export format {fmt!r}; use csv or vtk-legacy")
    return path
