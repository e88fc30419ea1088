"""Result files: CSV tables, JSON manifests and gnuplot stubs."""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FLOAT_FMT = "%.16e"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def write_csv(path, header: Sequence[str], rows) -> Path:
    """Write rows under a header; floats in full-precision scientific notation."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row length does not match header")
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def write_columns(path, columns: Mapping[str, Sequence]) -> Path:
    """Write equal-length columns given as a name -> values mapping."""
    names = list(columns)
    data = [list(columns[n]) for n in names]
    if len({len(c) for c in data}) > 1:
        raise ValueError("columns differ in length")
    return write_csv(path, names, zip(*data))


def write_matrix(path, matrix, row_label: str = "row", col_prefix: str = "c") -> Path:
    m = np.asarray(matrix)
    header = [row_label] + [f"{col_prefix}{j}" for j in range(m.shape[1])]
    return write_csv(path, header, ([i] + list(r) for i, r in enumerate(m)))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV written by this module."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict[str, str]:
    import numpy
    import scipy

    from . import __version__, kernels
    out = {"oectsim": __version__, "python": platform.python_version(),
           "numpy": numpy.__version__, "scipy": scipy.__version__,
           "backend": kernels.BACKEND}
    try:
        import numba
        out["numba"] = numba.__version__
    except Exception:  # pragma: no cover
        pass
    return out


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if np.isfinite(f) else repr(f)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def write_manifest(path, manifest: Mapping) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(dict(manifest)), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


def write_gnuplot(path, csv_name: str, x: str, ys: Sequence[str], header: Sequence[str],
                  title: str = "", logx: bool = False) -> Path:
    """Minimal gnuplot script plotting columns of a CSV by name."""
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{x}'",
    ]
    if logx:
        lines.append("set logscale x")
    xi = header.index(x) + 1
    plots = [f"'{csv_name}' using {xi}:{header.index(y) + 1} with linespoints" for y in ys]
    lines.append("plot " + ", \\\n     ".join(plots))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
