"""CSV and JSON writers with locale-free 17-significant-digit numbers."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1


def fmt(x: float) -> str:
    """17 significant digits; integers stay integral, non-finite values become ``nan``/``inf``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    return format(x, ".17g")


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def coord_names(prefix: str, dim: int) -> list:
    return [f"{prefix}{i + 1}" for i in range(dim)]


def trajectory_rows(traj, names=None, extra=("psi", "psi_star", "H")):
    """Header and rows ``param,<coords>[,psi,psi_star,H]`` for a Trajectory."""
    dim = traj.points.shape[1]
    names = list(names) if names is not None else coord_names(traj.chart.value, dim)
    cols = [k for k in extra if k in traj.scalars]
    header = ["param"] + names + cols
    rows = [[s, *p, *(traj.scalars[k][i] for k in cols)]
            for i, (s, p) in enumerate(zip(traj.samples, traj.points))]
    return header, rows


def write_trajectory_csv(path, traj, names=None) -> Path:
    header, rows = trajectory_rows(traj, names)
    return write_csv(path, header, rows)


def write_phase_csv(path, traj) -> Path:
    """``param,<coords>,<momenta>,H`` for a PhaseTrajectory."""
    dim = traj.positions.shape[1]
    header = ["param"] + coord_names(traj.chart.value, dim) + coord_names("p", dim) + ["H"]
    rows = [[s, *x, *p, h] for s, x, p, h in zip(traj.samples, traj.positions, traj.momenta, traj.H_values)]
    return write_csv(path, header, rows)


def read_csv(path):
    """Header list and float array of a file written by :func:`write_csv`."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(len(lines) - 1, len(header))


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, np.ndarray):
        return _dump(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number, bool)) or v is None for v in obj):
            return "[" + ", ".join(_dump(v, indent, level) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _quote(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text; floats carry 17 significant digits, non-finite become null."""
    return _dump(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, dict) and "schema_version" not in obj:
        obj = {"schema_version": SCHEMA_VERSION, **obj}
    path.write_text(dumps(obj), encoding="utf-8")
    return path
