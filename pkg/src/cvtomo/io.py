"""File formats: samples CSV with JSON sidecar, density-matrix JSON, grid and mode CSVs.

All numbers are written with 9 significant digits through ``%``-formatting,
which does not depend on the locale.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InputFormatError
from .fock import DensityMatrix, GridSpec, QuadratureData, WignerGrid

FMT = "%.9g"


def fmt(v: float) -> str:
    return FMT % v


def _round9(arr) -> list:
    """Nested lists of floats rounded to 9 significant digits (for JSON)."""
    a = np.asarray(arr, dtype=float)
    return [float(fmt(v)) for v in a.ravel()] if a.ndim <= 1 else [_round9(row) for row in a]


def _read_rows(path: Path, header: list[str]) -> list[tuple[int, list[float]]]:
    """Numeric rows of a CSV with the given header; comment lines start with ``#``."""
    rows: list[tuple[int, list[float]]] = []
    seen_header = False
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = [f.strip() for f in next(csv.reader([text]))]
            if not seen_header:
                if fields != header:
                    raise InputFormatError(f"{path}:{lineno}: expected header {','.join(header)!r}, got {text!r}")
                seen_header = True
                continue
            if len(fields) != len(header):
                raise InputFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                raise InputFormatError(f"{path}:{lineno}: non-numeric value in {text!r}") from None
            if not all(np.isfinite(vals)):
                raise InputFormatError(f"{path}:{lineno}: non-finite value in {text!r}")
            rows.append((lineno, vals))
    if not seen_header:
        raise InputFormatError(f"{path}: missing header line {','.join(header)!r}")
    return rows


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray], comments: list[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


def sidecar_path(samples_path) -> Path:
    return Path(samples_path).with_suffix(".json")


def write_samples(path, data: QuadratureData, meta: dict[str, Any] | None = None) -> Path:
    """Write ``theta,q`` rows and a JSON sidecar next to them; returns the sidecar path."""
    path = Path(path)
    _write_csv(path, ["theta", "q"], [data.theta, data.q])
    side = sidecar_path(path)
    payload = dict(data.meta)
    payload.update(meta or {})
    payload["n_samples"] = len(data)
    with open(side, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return side


def read_samples(path) -> QuadratureData:
    path = Path(path)
    rows = _read_rows(path, ["theta", "q"])
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    arr = np.array([v for _, v in rows])
    meta: dict = {}
    side = sidecar_path(path)
    if side.exists():
        meta = read_json(side)
    return QuadratureData(arr[:, 0], arr[:, 1], meta)


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Density matrices
# ---------------------------------------------------------------------------


def density_matrix_to_dict(rho, se=None, extra: dict | None = None) -> dict:
    mat = np.asarray(rho, dtype=complex) if not isinstance(rho, DensityMatrix) else rho.data
    out: dict = {"dim": int(mat.shape[0]), "re": _round9(mat.real), "im": _round9(mat.imag)}
    if se is not None:
        out["se"] = _round9(np.asarray(se, dtype=float))
    if extra:
        out.update(extra)
    return out


def density_matrix_from_dict(d: dict) -> tuple[DensityMatrix, np.ndarray | None]:
    try:
        dim = int(d["dim"])
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"density matrix record is malformed: {exc}") from None
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise InputFormatError(f"density matrix blocks do not have shape ({dim}, {dim})")
    se = np.asarray(d["se"], dtype=float) if "se" in d else None
    return DensityMatrix(re + 1j * im), se


def write_density_matrix(path, rho, se=None, extra: dict | None = None) -> None:
    write_json(path, density_matrix_to_dict(rho, se, extra))


def read_density_matrix(path) -> tuple[DensityMatrix, np.ndarray | None]:
    return density_matrix_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# Grids and traces
# ---------------------------------------------------------------------------


def write_wigner(path, w: WignerGrid, header=("q", "p", "w")) -> None:
    qq, pp = np.meshgrid(w.q, w.p, indexing="ij")
    _write_csv(Path(path), list(header), [qq.ravel(), pp.ravel(), w.values.ravel()])


def read_wigner(path, header=("q", "p", "w")) -> WignerGrid:
    """Read a grid written by :func:`write_wigner` (rows ordered q-major)."""
    path = Path(path)
    rows = _read_rows(path, list(header))
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    arr = np.array([v for _, v in rows])
    qs = np.unique(arr[:, 0])
    ps = np.unique(arr[:, 1])
    if qs.size * ps.size != arr.shape[0]:
        raise InputFormatError(f"{path}: rows do not form a complete rectangular grid")
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    vals = arr[order, 2].reshape(qs.size, ps.size)
    grid = GridSpec(float(qs[0]), float(qs[-1]), float(ps[0]), float(ps[-1]), qs.size, ps.size)
    return WignerGrid(grid, vals)


def write_trace(path, lines: list[tuple[int, float, float]]) -> None:
    cols = np.array(lines, dtype=float).T if lines else [np.empty(0)] * 3
    _write_csv(Path(path), ["iteration", "log_likelihood", "residual"], list(cols))


# ---------------------------------------------------------------------------
# Spatial modes
# ---------------------------------------------------------------------------


def write_mode(path, mode) -> None:
    comments = [f"k0={fmt(mode.k0)}"]
    if mode.dims == 1:
        _write_csv(Path(path), ["x", "re", "im"], [mode.x, mode.field.real, mode.field.imag], comments)
    else:
        xx, yy = np.meshgrid(mode.x, mode.y, indexing="ij")
        f = mode.field.ravel()
        _write_csv(Path(path), ["x", "y", "re", "im"], [xx.ravel(), yy.ravel(), f.real, f.imag], comments)


def _k0_comment(path: Path) -> float:
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if s.startswith("#") and "k0=" in s:
                try:
                    return float(s.split("k0=", 1)[1].split()[0])
                except ValueError:
                    break
            elif s and not s.startswith("#"):
                break
    return 1.0


def read_mode(path, k0: float | None = None):
    """Read a 1D (``x,re,im``) or 2D (``x,y,re,im``) mode file."""
    from .spatial import SpatialMode

    path = Path(path)
    with open(path) as fh:
        first = next((ln.strip() for ln in fh if ln.strip() and not ln.strip().startswith("#")), "")
    header = [h.strip() for h in first.split(",")]
    k0 = _k0_comment(path) if k0 is None else k0
    rows = _read_rows(path, header if header in (["x", "re", "im"], ["x", "y", "re", "im"]) else ["x", "re", "im"])
    arr = np.array([v for _, v in rows])
    if arr.shape[0] < 3:
        raise InputFormatError(f"{path}: need at least 3 rows")
    if len(header) == 3:
        x = arr[:, 0]
        pitch = float(np.mean(np.diff(x)))
        if not np.allclose(np.diff(x), pitch, rtol=1e-6, atol=1e-12):
            raise InputFormatError(f"{path}: x values are not uniformly spaced")
        return SpatialMode(arr[:, 1] + 1j * arr[:, 2], pitch, k0)
    xs, ys = np.unique(arr[:, 0]), np.unique(arr[:, 1])
    if xs.size * ys.size != arr.shape[0]:
        raise InputFormatError(f"{path}: rows do not form a complete grid")
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    field = (arr[order, 2] + 1j * arr[order, 3]).reshape(xs.size, ys.size)
    return SpatialMode(field, float(xs[1] - xs[0]), k0)


def parse_config(path) -> dict[str, str]:
    """Flat ``key = value`` configuration; ``#`` starts a comment."""
    out: dict[str, str] = {}
    path = Path(path)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise InputFormatError(f"{path}:{lineno}: expected 'key = value', got {text!r}")
            key, value = (t.strip() for t in text.split("=", 1))
            if not key:
                raise InputFormatError(f"{path}:{lineno}: empty key")
            out[key] = value
    return out
