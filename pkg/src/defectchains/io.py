"""Field files and defect exporters.

A field file is a JSON header ``{d, m, origin, spacing, counts, target?,
endianness}`` with either an inline ``values`` array or a ``blob`` naming a
sidecar of raw little-endian float64 values in row-major vertex order.
"""
from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .chain import Chain
from .field import FieldError, SampledField
from .mesh import GridSpec
from .singular import SingularChain

SUPPORTED_D = (2, 3)
SUPPORTED_M = (2, 3, 5)


class FieldFileError(ValueError):
    """Malformed field file."""


def write_field(u: SampledField, path, *, blob: bool = False) -> Path:
    """Write ``u``; with ``blob`` the values go to ``<path stem>.bin`` next to the header."""
    path = Path(path)
    header = {**u.to_json_header(), "endianness": "little"}
    if blob:
        bin_path = path.with_suffix(".bin")
        u.values.astype("<f8").tofile(bin_path)
        header["blob"] = bin_path.name
    else:
        header["values"] = u.values.tolist()
    path.write_text(json.dumps(header))
    return path


def field_from_header(header: dict, base_dir: Path | None = None) -> SampledField:
    for key in ("d", "m", "origin", "spacing", "counts"):
        if key not in header:
            raise FieldFileError(f"field header lacks {key!r}")
    d, m = int(header["d"]), int(header["m"])
    if d not in SUPPORTED_D:
        raise FieldFileError(f"unsupported domain dimension d={d}; expected one of {SUPPORTED_D}")
    if m not in SUPPORTED_M:
        raise FieldFileError(f"unsupported value dimension m={m}; expected one of {SUPPORTED_M}")
    if not (len(header["origin"]) == len(header["spacing"]) == len(header["counts"]) == d):
        raise FieldFileError("origin, spacing and counts must have d entries")
    if header.get("endianness", "little") != "little":
        raise FieldFileError("only little-endian blobs are supported")
    grid = GridSpec.from_json(header)
    expected = m * grid.n_vertices
    if "blob" in header:
        blob = Path(header["blob"])
        if not blob.is_absolute() and base_dir is not None:
            blob = base_dir / blob
        raw = np.fromfile(blob, dtype="<f8")
    elif "values" in header:
        raw = np.asarray(header["values"], dtype=float).ravel()
    else:
        raise FieldFileError("field file has neither 'values' nor 'blob'")
    if raw.size != expected:
        raise FieldFileError(f"value count mismatch: expected {expected}, found {raw.size}")
    if not np.all(np.isfinite(raw)):
        raise FieldFileError("field contains NaN or Inf values")
    try:
        return SampledField(grid, raw.reshape(grid.n_vertices, m).astype(np.float64), header.get("target"))
    except FieldError as exc:
        raise FieldFileError(str(exc)) from exc


def parse_field(path) -> SampledField:
    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FieldFileError(f"{path}: not valid JSON ({exc})") from exc
    return field_from_header(header, path.parent)


# -- defects -------------------------------------------------------------------------

def _rows(S: SingularChain):
    locs = S.locations()
    for (cid, el), x in zip(S.chain.items(), locs):
        yield int(cid), x, el.coords


def _to_csv(S: SingularChain) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = S.chain.complex.ambient_dim
    rank = S.chain.group.rank
    w.writerow(["cell"] + [f"x{i}" for i in range(d)] + [f"g{j}" for j in range(rank)])
    for cid, x, coords in _rows(S):
        w.writerow([cid] + [repr(float(v)) for v in x] + list(coords))
    return buf.getvalue()


def _label(coords) -> str:
    if len(coords) == 1:
        return f"{coords[0]:+d}"
    return "(" + ",".join(str(c) for c in coords) + ")"


def _to_svg(S: SingularChain, size: int = 400) -> str:
    grid = S.chain.complex.grid
    if grid is None or grid.dim != 2:
        raise ValueError("svg export needs a 2D grid")
    lo, hi = grid.lower, grid.upper
    scale = size / float(max(hi - lo))
    w, h = (hi - lo) * scale

    def tx(p):
        return (p[0] - lo[0]) * scale, (hi[1] - p[1]) * scale

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" viewBox="0 0 {w:.1f} {h:.1f}">',
             f'<rect x="0" y="0" width="{w:.1f}" height="{h:.1f}" fill="none" stroke="black"/>']
    for cid, x, coords in _rows(S):
        px, py = tx(x)
        color = "crimson" if sum(coords) > 0 else "royalblue"
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="4" fill="{color}" data-cell="{cid}"/>')
        parts.append(f'<text x="{px + 6:.2f}" y="{py - 6:.2f}" font-size="12">{_label(coords)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def defect_polylines(S: SingularChain) -> list[np.ndarray]:
    """Chain the oriented dual 1-cells of ``S`` into polylines (closed ones repeat their first point)."""
    ch = S.chain
    dual = ch.complex
    B = dual.boundary_matrix(1).tocsc()
    pieces = {}
    for cid, el in ch.items():
        c = el.coords[0]
        col = slice(B.indptr[cid], B.indptr[cid + 1])
        ends = dict(zip(B.data[col].tolist(), B.indices[col].tolist()))
        start, stop = ends.get(-1), ends.get(1)
        pts = dual.polyline(cid)
        if c < 0:
            start, stop, pts = stop, start, pts[::-1]
        for _ in range(abs(int(c))):
            pieces.setdefault(start, []).append((stop, pts))
    lines = []
    starts = [s for s in pieces if s is None] + sorted(s for s in pieces if s is not None)
    for s in starts:
        while pieces.get(s):
            cur = s
            line = []
            while pieces.get(cur):
                nxt, pts = pieces[cur].pop()
                line.extend(pts if not line else pts[1:])
                cur = nxt
                if cur == s or cur is None:
                    break
            lines.append(np.array(line))
    return lines


def _to_obj(S: SingularChain) -> str:
    if S.chain.complex.ambient_dim != 3:
        raise ValueError("obj export needs a 3D domain")
    out = ["# defect polylines"]
    lines = defect_polylines(S)
    idx = 1
    refs = []
    for line in lines:
        out.extend(f"v {p[0]!r} {p[1]!r} {p[2]!r}" for p in line)
        refs.append(list(range(idx, idx + len(line))))
        idx += len(line)
    for r, line in zip(refs, lines):
        if len(line) > 2 and np.allclose(line[0], line[-1]):
            r = r[:-1] + [r[0]]
        out.append("l " + " ".join(str(i) for i in r))
    return "\n".join(out) + "\n"


def export_defects(S: SingularChain, fmt: str = "json", path=None) -> str:
    """Render ``S`` as json, csv, svg (2D points) or obj (3D polylines); optionally write to ``path``."""
    if S.chain.dim > 1:
        raise ValueError(f"cannot export a {S.chain.dim}-dimensional defect chain")
    if fmt == "json":
        text = json.dumps(S.to_json())
    elif fmt == "csv":
        text = _to_csv(S)
    elif fmt == "svg":
        if S.chain.dim != 0:
            raise ValueError("svg export draws defect points")
        text = _to_svg(S)
    elif fmt == "obj":
        if S.chain.dim != 1:
            raise ValueError("obj export draws defect lines")
        text = _to_obj(S)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def load_defects(data: dict | str, u: SampledField) -> Chain:
    """Rebuild the chain from json export output on the dual complex of ``u``."""
    if isinstance(data, str):
        data = json.loads(data)
    return Chain.from_json(data["chain"], u.dual)
