"""Legacy ASCII VTK export (and a reader for round-trip checks).

Plain point clouds become POLYDATA with VERTICES; clouds with cells
become UNSTRUCTURED_GRID.  Legacy ASCII is deliberately low-tech: any
standard viewer reads it and no dependency is needed to write it.
"""

from __future__ import annotations

import numpy as np

from .mesh import PointCloud

__all__ = ["VtkFormatError", "export_vtk", "read_vtk"]


class VtkFormatError(Exception):
    """Raised when a VTK file cannot be parsed back."""


# legacy cell type codes by cell arity; arity 4 is a quad in 2D, tetra in 3D
_CELL_TYPES_2D = {2: 3, 3: 5, 4: 9}
_CELL_TYPES_3D = {2: 3, 3: 5, 4: 10, 8: 12}


def _points_3d(cloud: PointCloud) -> np.ndarray:
    pts = np.zeros((cloud.n_points, 3))
    pts[:, : cloud.dim] = cloud.coords[:, :3]
    return pts


def export_vtk(path, cloud: PointCloud, fields: dict[str, np.ndarray],
               cells: np.ndarray | None = None, title: str = "meshcs export") -> None:
    """Write points, optional cells and named point-data scalars."""
    for name, values in fields.items():
        values = np.asarray(values)
        if values.shape != (cloud.n_points,):
            raise ValueError(f"field {name!r} has shape {values.shape}, expected ({cloud.n_points},)")
    pts = _points_3d(cloud)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.splitlines()[0][:255] + "\n" if title else "meshcs export\n")
        fh.write("ASCII\n")
        if cells is None:
            fh.write("DATASET POLYDATA\n")
            fh.write(f"POINTS {cloud.n_points} double\n")
            for p in pts:
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            fh.write(f"VERTICES {cloud.n_points} {2 * cloud.n_points}\n")
            for i in range(cloud.n_points):
                fh.write(f"1 {i}\n")
        else:
            cells = np.asarray(cells, dtype=np.int64)
            if cells.ndim != 2:
                raise ValueError("cells must be a 2-d connectivity array")
            arity = cells.shape[1]
            table = _CELL_TYPES_3D if cloud.dim == 3 else _CELL_TYPES_2D
            if arity not in table:
                raise ValueError(f"unsupported cell arity {arity} in {cloud.dim}D")
            fh.write("DATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {cloud.n_points} double\n")
            for p in pts:
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            fh.write(f"CELLS {cells.shape[0]} {cells.shape[0] * (arity + 1)}\n")
            for row in cells:
                fh.write(str(arity) + " " + " ".join(str(int(i)) for i in row) + "\n")
            fh.write(f"CELL_TYPES {cells.shape[0]}\n")
            for _ in range(cells.shape[0]):
                fh.write(f"{table[arity]}\n")
        if fields:
            fh.write(f"POINT_DATA {cloud.n_points}\n")
            for name, values in fields.items():
                safe = name.replace(" ", "_")
                fh.write(f"SCALARS {safe} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for v in np.asarray(values, dtype=np.float64):
                    fh.write(format(v, ".17g") + "\n")


def read_vtk(path) -> tuple[PointCloud, dict[str, np.ndarray]]:
    """Parse points and scalar point data from a legacy ASCII VTK file.

    Understands the subset export_vtk writes; enough for round-trip
    validation without an external viewer.
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        raw = fh.read().splitlines()
    # fixed legacy preamble: version comment, free-text title, ASCII marker
    if len(raw) < 4 or not raw[0].startswith("# vtk DataFile"):
        raise VtkFormatError(f"{path}: not an ASCII legacy VTK file")
    if raw[2].split() != ["ASCII"]:
        raise VtkFormatError(f"{path}: not an ASCII legacy VTK file")
    lines = [t for t in (ln.split() for ln in raw[3:]) if t]
    if not lines or lines[0][0] != "DATASET":
        raise VtkFormatError(f"{path}: missing DATASET")

    flat = [tok for line in lines[1:] for tok in line]
    pos = 0

    def expect(word: str):
        nonlocal pos
        if pos >= len(flat) or flat[pos] != word:
            found = flat[pos] if pos < len(flat) else "<eof>"
            raise VtkFormatError(f"{path}: expected {word}, found {found}")
        pos += 1

    def take_int() -> int:
        nonlocal pos
        try:
            value = int(flat[pos])
        except (IndexError, ValueError) as exc:
            raise VtkFormatError(f"{path}: expected integer") from exc
        pos += 1
        return value

    def take_floats(count: int) -> np.ndarray:
        nonlocal pos
        if pos + count > len(flat):
            raise VtkFormatError(f"{path}: truncated numeric block")
        try:
            out = np.array([float(t) for t in flat[pos : pos + count]])
        except ValueError as exc:
            raise VtkFormatError(f"{path}: bad number in block") from exc
        pos += count
        return out

    expect("POINTS")
    n = take_int()
    pos += 1  # dtype word
    pts = take_floats(3 * n).reshape(n, 3)

    fields: dict[str, np.ndarray] = {}
    while pos < len(flat):
        word = flat[pos]
        if word == "POINT_DATA":
            pos += 1
            if take_int() != n:
                raise VtkFormatError(f"{path}: POINT_DATA count mismatch")
        elif word == "SCALARS":
            pos += 1
            name = flat[pos]
            pos += 2  # name and dtype
            if pos < len(flat) and flat[pos] != "LOOKUP_TABLE":
                pos += 1  # optional component count
            expect("LOOKUP_TABLE")
            pos += 1  # table name
            fields[name] = take_floats(n)
        elif word in ("VERTICES", "CELLS"):
            pos += 1
            take_int()
            total = take_int()
            pos += total
        elif word == "CELL_TYPES":
            pos += 1
            count = take_int()
            pos += count
        else:
            raise VtkFormatError(f"{path}: unexpected token {word!r}")

    # drop padded axes that are identically zero to recover the original dim
    dim = 3
    while dim > 1 and np.all(pts[:, dim - 1] == 0.0):
        dim -= 1
    return PointCloud(pts[:, :dim]), fields
