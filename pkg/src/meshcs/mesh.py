"""Point clouds, contiguous partitions and the binary group hierarchy.

The hierarchy is a balanced binary tree over point indices built by
recursive median splits along the longest bounding-box axis.  It is the
geometric backbone for the multiwavelet basis: every tree node is a
group of points, and groups merge pairwise from the leaves up to the
root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeshFormatError",
    "PointCloud",
    "Partition",
    "HierarchyNode",
    "GroupHierarchy",
    "partition_cloud",
    "build_hierarchy",
    "read_mesh",
    "write_mesh",
]


class MeshFormatError(Exception):
    """Raised when a mesh file is malformed or inconsistent."""


@dataclass(frozen=True)
class PointCloud:
    """Immutable set of N points in d-dimensional space.

    Parameters
    ----------
    coords : ndarray of shape (N, d)
        Point coordinates.  Stored as float64; must be finite.
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if coords.ndim != 2:
            raise ValueError(f"coords must be 2-d, got shape {coords.shape}")
        if coords.shape[0] < 1 or coords.shape[1] < 1:
            raise ValueError(f"need at least one point and one axis, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box as (mins, maxs), each of shape (d,)."""
        return self.coords.min(axis=0), self.coords.max(axis=0)

    def subset(self, indices: np.ndarray) -> "PointCloud":
        return PointCloud(self.coords[indices])


@dataclass(frozen=True)
class Partition:
    """Contiguous index range [start, stop) owned by one rank."""

    rank_id: int
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.stop, dtype=np.int64)


def partition_cloud(cloud: PointCloud, n_parts: int) -> list[Partition]:
    """Split [0, N) into n_parts contiguous, balanced ranges.

    Sizes differ by at most one; earlier ranks take the remainder.
    """
    n = cloud.n_points
    if not 1 <= n_parts <= n:
        raise ValueError(f"n_parts must be in [1, {n}], got {n_parts}")
    base, extra = divmod(n, n_parts)
    parts = []
    start = 0
    for rank in range(n_parts):
        size = base + (1 if rank < extra else 0)
        parts.append(Partition(rank, start, start + size))
        start += size
    return parts


# ---------------------------------------------------------------------------
# group hierarchy
# ---------------------------------------------------------------------------

@dataclass
class HierarchyNode:
    """One group of points in the binary hierarchy.

    ``indices`` keeps the split ordering: left child's indices first,
    then right child's.  ``depth`` is 0 at the root.
    """

    id: int
    depth: int
    indices: np.ndarray
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    left: int = -1
    right: int = -1
    parent: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left < 0

    @property
    def size(self) -> int:
        return self.indices.shape[0]


@dataclass
class GroupHierarchy:
    """Binary tree of point groups; node 0 is the root.

    ``depth`` equals the deepest leaf's depth and is the number of merge
    levels available to the wavelet transform (0 when the root itself is
    a leaf).  The cloud the tree was built on rides along because every
    consumer needs the coordinates next.
    """

    cloud: PointCloud
    nodes: list[HierarchyNode]
    leaf_capacity: int
    depth: int
    n_points: int

    @property
    def root(self) -> HierarchyNode:
        return self.nodes[0]

    def leaves(self) -> list[HierarchyNode]:
        return [v for v in self.nodes if v.is_leaf]

    def internal_at_depth(self, depth: int) -> list[HierarchyNode]:
        return [v for v in self.nodes if not v.is_leaf and v.depth == depth]

    def validate(self) -> None:
        """Check structural invariants; raises ValueError on violation."""
        def check(ok: bool, what: str) -> None:
            if not ok:
                raise ValueError(f"broken hierarchy: {what}")

        seen = np.concatenate([v.indices for v in self.leaves()])
        check(seen.shape[0] == self.n_points, "leaf index count")
        check(np.array_equal(np.sort(seen), np.arange(self.n_points)),
              "leaves must cover every point exactly once")
        for v in self.nodes:
            if v.is_leaf:
                check(v.size <= self.leaf_capacity, f"leaf {v.id} over capacity")
            else:
                left, right = self.nodes[v.left], self.nodes[v.right]
                check(v.size > self.leaf_capacity, f"node {v.id} should be a leaf")
                check(left.size == (v.size + 1) // 2, f"node {v.id} split is uneven")
                check(left.size + right.size == v.size, f"node {v.id} child sizes")
                check(np.array_equal(v.indices,
                                     np.concatenate([left.indices, right.indices])),
                      f"node {v.id} indices disagree with children")


def _split_order(coords: np.ndarray, indices: np.ndarray) -> tuple[np.ndarray, int]:
    """Order ``indices`` along the longest bbox axis of their points.

    Ties on the coordinate fall back to the original point index so the
    split is fully deterministic even with duplicated coordinates.
    """
    pts = coords[indices]
    extent = pts.max(axis=0) - pts.min(axis=0)
    axis = int(np.argmax(extent))  # argmax takes the lowest axis on ties
    order = np.lexsort((indices, pts[:, axis]))
    return indices[order], axis


def build_hierarchy(cloud: PointCloud, leaf_capacity: int) -> GroupHierarchy:
    """Build the binary group hierarchy by recursive median splits.

    Parameters
    ----------
    cloud : PointCloud
        Points to organise.
    leaf_capacity : int
        Largest group size that is not split further.  Groups larger
        than this get exactly two children, the left one taking
        ceil(size / 2) points in split order.

    Returns
    -------
    GroupHierarchy
        Nodes in preorder (root first), deterministic for fixed input.
    """
    if leaf_capacity < 1:
        raise ValueError(f"leaf_capacity must be >= 1, got {leaf_capacity}")
    coords = cloud.coords
    nodes: list[HierarchyNode] = []

    def make_node(indices: np.ndarray, depth: int, parent: int) -> int:
        pts = coords[indices]
        node = HierarchyNode(
            id=len(nodes),
            depth=depth,
            indices=indices,
            bbox_min=pts.min(axis=0),
            bbox_max=pts.max(axis=0),
            parent=parent,
        )
        nodes.append(node)
        nid = node.id
        if indices.shape[0] > leaf_capacity:
            ordered, _ = _split_order(coords, indices)
            half = (ordered.shape[0] + 1) // 2
            node.indices = ordered
            node.left = make_node(ordered[:half], depth + 1, nid)
            node.right = make_node(ordered[half:], depth + 1, nid)
            # parent keeps children's concatenated order
            node.indices = np.concatenate([nodes[node.left].indices, nodes[node.right].indices])
        return nid

    import sys

    limit = sys.getrecursionlimit()
    needed = 2 * (cloud.n_points.bit_length() + 10)
    if limit < needed:
        sys.setrecursionlimit(needed)
    make_node(np.arange(cloud.n_points, dtype=np.int64), 0, -1)
    depth = max(v.depth for v in nodes if v.is_leaf)
    return GroupHierarchy(cloud=cloud, nodes=nodes, leaf_capacity=leaf_capacity,
                          depth=depth, n_points=cloud.n_points)


# ---------------------------------------------------------------------------
# mesh file format
# ---------------------------------------------------------------------------

_MESH_MAGIC = "meshcs-points"
_MESH_VERSION = "v1"


def write_mesh(path, cloud: PointCloud, cells: np.ndarray | None = None) -> None:
    """Write a point cloud (and optional cells) as a meshcs-points file."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{_MESH_MAGIC} {_MESH_VERSION} {cloud.dim} {cloud.n_points}\n")
        for row in cloud.coords:
            fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
        if cells is not None:
            cells = np.asarray(cells, dtype=np.int64)
            if cells.ndim != 2:
                raise ValueError("cells must be a 2-d connectivity array")
            fh.write(f"cells {cells.shape[0]} {cells.shape[1]}\n")
            for row in cells:
                fh.write(" ".join(str(int(i)) for i in row) + "\n")


def read_mesh(path) -> tuple[PointCloud, np.ndarray | None]:
    """Read a meshcs-points file; returns (cloud, cells-or-None)."""
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise MeshFormatError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != _MESH_MAGIC or header[1] != _MESH_VERSION:
        raise MeshFormatError(f"{path}: bad header {lines[0]!r}")
    try:
        dim, n = int(header[2]), int(header[3])
    except ValueError as exc:
        raise MeshFormatError(f"{path}: bad header {lines[0]!r}") from exc
    if dim < 1 or n < 1:
        raise MeshFormatError(f"{path}: dim and point count must be positive")
    if len(lines) < 1 + n:
        raise MeshFormatError(f"{path}: expected {n} coordinate lines, found {len(lines) - 1}")
    coords = np.empty((n, dim))
    for i, ln in enumerate(lines[1 : 1 + n]):
        parts = ln.split()
        if len(parts) != dim:
            raise MeshFormatError(f"{path}: line {i + 2}: expected {dim} coordinates, got {len(parts)}")
        try:
            coords[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise MeshFormatError(f"{path}: line {i + 2}: bad coordinate") from exc
    if not np.all(np.isfinite(coords)):
        raise MeshFormatError(f"{path}: non-finite coordinate")

    cells = None
    rest = lines[1 + n :]
    if rest:
        ctl = rest[0].split()
        if len(ctl) != 3 or ctl[0] != "cells":
            raise MeshFormatError(f"{path}: unexpected trailing content {rest[0]!r}")
        try:
            count, arity = int(ctl[1]), int(ctl[2])
        except ValueError as exc:
            raise MeshFormatError(f"{path}: bad cells header {rest[0]!r}") from exc
        if count < 0 or arity < 1:
            raise MeshFormatError(f"{path}: bad cells header {rest[0]!r}")
        if len(rest) - 1 != count:
            raise MeshFormatError(f"{path}: expected {count} cell lines, found {len(rest) - 1}")
        cells = np.empty((count, arity), dtype=np.int64)
        for i, ln in enumerate(rest[1:]):
            parts = ln.split()
            if len(parts) != arity:
                raise MeshFormatError(f"{path}: cell {i}: expected {arity} indices, got {len(parts)}")
            try:
                cells[i] = [int(p) for p in parts]
            except ValueError as exc:
                raise MeshFormatError(f"{path}: cell {i}: bad index") from exc
        if count and (cells.min() < 0 or cells.max() >= n):
            raise MeshFormatError(f"{path}: cell index out of range [0, {n})")
    return PointCloud(coords), cells
