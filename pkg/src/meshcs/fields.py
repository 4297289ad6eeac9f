"""Analytic test fields, holed-domain point generators, field file IO.

The two 2D reference fields exercise opposite ends of the spectrum: a
high-frequency sine product that needs many samples, and a low-frequency
one that compresses much harder.
"""

from __future__ import annotations

import numpy as np

from .basis import PolynomialSpace, _monomials
from .mesh import PointCloud

__all__ = [
    "FieldFormatError",
    "eval_field_f",
    "eval_field_g",
    "eval_field_smooth",
    "polynomial_field",
    "expression_field",
    "gen_holed_mesh",
    "write_field",
    "read_field",
]


class FieldFormatError(Exception):
    """Raised when a field file is malformed."""


def _require_2d(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {points.shape}")
    return points


def eval_field_f(points: np.ndarray) -> np.ndarray:
    """High-frequency 2D test field 48 sin(8 pi x) sin(7 pi y) sin(6 pi x)."""
    points = _require_2d(points)
    x, y = points[:, 0], points[:, 1]
    return 48.0 * np.sin(8 * np.pi * x) * np.sin(7 * np.pi * y) * np.sin(6 * np.pi * x)


def eval_field_g(points: np.ndarray) -> np.ndarray:
    """Low-frequency 2D test field 12 sin(2 pi x) (4 sin(2 pi x) - 4 sin(2 pi y))."""
    points = _require_2d(points)
    x, y = points[:, 0], points[:, 1]
    return 12.0 * np.sin(2 * np.pi * x) * (4.0 * np.sin(2 * np.pi * x) - 4.0 * np.sin(2 * np.pi * y))


def eval_field_smooth(points: np.ndarray) -> np.ndarray:
    """Smooth low-frequency field for any dimension; used for 3D runs."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"expected (n, d) points, got shape {points.shape}")
    prod = np.prod(np.sin(2 * np.pi * points), axis=1)
    ripple = np.sum(np.cos(3 * np.pi * points), axis=1)
    return 25.0 * prod + 10.0 * ripple


def polynomial_field(cloud: PointCloud, degree: int, seed: int = 0) -> np.ndarray:
    """Random polynomial of the given total degree, coefficients from ``seed``.

    Monomials are centered to the cloud bbox, so values stay O(1) and
    the field genuinely contains every degree up to ``degree``.
    """
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    space = PolynomialSpace(degree + 1, cloud.dim)
    lo, hi = cloud.bbox()
    vander = _monomials(cloud.coords, lo, hi, space.exponent_table())
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, space.q)
    return vander @ coeffs


_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "pi": np.pi, "e": np.e,
}


def expression_field(cloud: PointCloud, expr: str) -> np.ndarray:
    """Evaluate an arithmetic expression in x, y, z over the cloud.

    Only elementary functions and the coordinate names are visible;
    missing axes are zero.  Intended for quick CLI experiments, not as
    a sandbox against hostile input.
    """
    coords = cloud.coords
    env = dict(_EXPR_NAMES)
    for axis, name in enumerate("xyz"):
        env[name] = coords[:, axis] if axis < cloud.dim else np.zeros(cloud.n_points)
    try:
        values = eval(expr, {"__builtins__": {}}, env)
        values = np.asarray(values, dtype=np.float64)
    except Exception as exc:
        raise ValueError(f"bad field expression {expr!r}: {exc}") from exc
    values = np.broadcast_to(values, (cloud.n_points,)).copy()
    if not np.all(np.isfinite(values)):
        raise ValueError(f"field expression {expr!r} produced non-finite values")
    return values


def gen_holed_mesh(n_target: int, n_holes: int, seed: int, dim: int = 2,
                   radius_range: tuple[float, float] = (0.05, 0.12)) -> PointCloud:
    """Quasi-uniform points in the unit cube minus round holes.

    Points are jittered grid cells, which mimics the spacing of nodes in
    an unstructured mesh (no clustering, no large gaps); plain uniform
    draws would cluster.  Holes are placed first, rejection-sampled
    until disjoint; the requested point count is met exactly by growing
    the grid and then thinning at random.  Deterministic per seed.
    """
    if n_target < 1:
        raise ValueError(f"n_target must be >= 1, got {n_target}")
    if not 1 <= dim <= 3:
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if n_holes < 0:
        raise ValueError(f"n_holes must be >= 0, got {n_holes}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    lo_r, hi_r = radius_range
    if not 0.0 < lo_r <= hi_r:
        raise ValueError(f"bad radius range {radius_range}")
    rng = np.random.default_rng(seed)

    centers = np.zeros((0, dim))
    radii = np.zeros(0)
    attempts = 0
    while radii.shape[0] < n_holes:
        attempts += 1
        if attempts > 1000 * max(n_holes, 1):
            raise ValueError(f"could not place {n_holes} disjoint holes after {attempts} attempts")
        center = rng.uniform(0.0, 1.0, dim)
        radius = rng.uniform(lo_r, hi_r)
        if np.all(np.linalg.norm(centers - center, axis=1) > radii + radius):
            centers = np.vstack([centers, center])
            radii = np.append(radii, radius)

    def jittered(cells_per_axis: int) -> np.ndarray:
        axes = np.arange(cells_per_axis, dtype=np.float64)
        grid = np.stack(np.meshgrid(*([axes] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        pts = (grid + rng.uniform(0.0, 1.0, grid.shape)) / cells_per_axis
        if n_holes:
            dist = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
            pts = pts[np.all(dist > radii[None, :], axis=1)]
        return pts

    g = max(1, int(np.ceil(n_target ** (1.0 / dim))))
    for _ in range(64):
        pts = jittered(g)
        if pts.shape[0] >= n_target:
            keep = rng.choice(pts.shape[0], size=n_target, replace=False)
            return PointCloud(pts[np.sort(keep)])
        g += max(1, g // 8)
    raise ValueError("hole configuration leaves too little free area to sample")


# ---------------------------------------------------------------------------
# field file format
# ---------------------------------------------------------------------------

_FIELD_MAGIC = "meshcs-field"
_FIELD_VERSION = "v1"


def write_field(path, name: str, values: np.ndarray) -> None:
    """Write one named scalar field: header line, then one value per line."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"field must be a vector, got shape {values.shape}")
    if not name or any(ch.isspace() for ch in name):
        raise ValueError(f"field name must be non-empty without whitespace, got {name!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{_FIELD_MAGIC} {_FIELD_VERSION} {name} {values.shape[0]}\n")
        for v in values:
            fh.write(format(v, ".17g") + "\n")


def read_field(path) -> tuple[str, np.ndarray]:
    """Read a field file; returns (name, values)."""
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise FieldFormatError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != _FIELD_MAGIC or header[1] != _FIELD_VERSION:
        raise FieldFormatError(f"{path}: bad header {lines[0]!r}")
    name = header[2]
    try:
        n = int(header[3])
    except ValueError as exc:
        raise FieldFormatError(f"{path}: bad header {lines[0]!r}") from exc
    if n < 1 or len(lines) - 1 != n:
        raise FieldFormatError(f"{path}: expected {n} values, found {len(lines) - 1}")
    try:
        values = np.array([float(ln) for ln in lines[1:]])
    except ValueError as exc:
        raise FieldFormatError(f"{path}: bad value") from exc
    if not np.all(np.isfinite(values)):
        raise FieldFormatError(f"{path}: non-finite value")
    return name, values
