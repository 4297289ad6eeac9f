"""Discrete orthonormal multiwavelet basis over a group hierarchy.

The operator is kept factored, Psi = F_1 * F_2 * ... * F_L, one sparse
orthogonal factor per merge round of the hierarchy.  F_L holds the root
merge, F_1 the deepest merges, so the truncated product F_1 * ... * F_j
("level j") is an analysis carried j rounds up from the leaves; applied
to a coefficient vector it always yields point values.

Each internal tree node contributes one orthogonal block.  The block's
first r columns span, in the coordinates handed up by the node's
children, the polynomials of total degree < w evaluated on the node's
points; those are the scaling outputs passed further up.  The remaining
columns are the node's wavelet (detail) coefficients, orthogonal to all
local polynomials, which is what makes smooth fields sparse.  Leaves
hand their raw point values to the parent block, so leaf capacity 2q
gives every block room for both outputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .mesh import GroupHierarchy, PointCloud, build_hierarchy

__all__ = [
    "PolynomialSpace",
    "WaveletFactor",
    "AlpertBasis",
    "local_scaling_block",
    "build_basis",
    "hierarchy_for_order",
    "apply_basis",
    "apply_basis_transpose",
]

# relative rank threshold for degenerate point configurations
_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class PolynomialSpace:
    """Monomials of total degree <= w - 1 in d variables.

    q = C(w - 1 + d, d) counts them; ``exponents`` lists them in graded
    lexicographic order, which fixes every downstream pivoting choice.
    """

    w: int
    d: int

    def __post_init__(self):
        if self.w < 1:
            raise ValueError(f"order w must be >= 1, got {self.w}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")

    @property
    def q(self) -> int:
        return comb(self.w - 1 + self.d, self.d)

    @property
    def leaf_capacity(self) -> int:
        """Hierarchy leaf capacity 2q: room for scaling plus detail outputs."""
        return 2 * self.q

    def exponent_table(self) -> np.ndarray:
        """(q, d) integer array of monomial exponents, graded lex order."""
        exps = [e for e in itertools.product(range(self.w), repeat=self.d) if sum(e) <= self.w - 1]
        exps.sort(key=lambda e: (sum(e), e))
        return np.array(exps, dtype=np.int64)


def _monomials(points: np.ndarray, bbox_min: np.ndarray, bbox_max: np.ndarray,
               exponents: np.ndarray) -> np.ndarray:
    """Vandermonde of the monomials, centered and scaled to the bbox.

    Scaling to [-1, 1] per axis keeps the columns well conditioned;
    zero-width axes fall back to unit scale.
    """
    center = 0.5 * (bbox_min + bbox_max)
    halfw = 0.5 * (bbox_max - bbox_min)
    halfw = np.where(halfw > 0.0, halfw, 1.0)
    x = (points - center) / halfw
    return np.prod(x[:, None, :] ** exponents[None, :, :], axis=2)


def local_scaling_block(points: np.ndarray, space: PolynomialSpace) -> np.ndarray:
    """Orthonormal columns spanning the group's polynomial Vandermonde.

    Returns an (m, r) block with r = numerical rank <= min(m, q),
    computed by column-pivoted QR with a 1e-12 relative rank threshold
    and leading diagonal made positive for determinism.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError(f"expected (m, d) points, got shape {points.shape}")
    vander = _monomials(points, points.min(axis=0), points.max(axis=0), space.exponent_table())
    q_cols, rdiag = _pivoted_orthonormal(vander)
    return q_cols


def _pivoted_orthonormal(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Economic pivoted QR returning rank-trimmed, sign-fixed columns."""
    q_cols, r_mat, _ = scipy.linalg.qr(mat, mode="economic", pivoting=True)
    rdiag = np.diag(r_mat)
    if rdiag.size == 0 or np.abs(rdiag[0]) == 0.0:
        return q_cols[:, :0], rdiag[:0]
    rank = int(np.count_nonzero(np.abs(rdiag) > _RANK_RTOL * np.abs(rdiag[0])))
    q_cols = q_cols[:, :rank] * np.sign(rdiag[:rank])
    return q_cols, rdiag[:rank]


def _orthonormal_block(wmat: np.ndarray) -> tuple[np.ndarray, int]:
    """Full c x c orthogonal block: scaling columns first, details after.

    The leading r columns are the pivoted orthonormalization of
    ``wmat``; the complement is the QR completion, sign-fixed so the
    largest entry of each detail column is positive.
    """
    c = wmat.shape[0]
    q_full, r_mat, _ = scipy.linalg.qr(wmat, mode="full", pivoting=True)
    rdiag = np.diag(r_mat)
    if rdiag.size and np.abs(rdiag[0]) > 0.0:
        rank = int(np.count_nonzero(np.abs(rdiag) > _RANK_RTOL * np.abs(rdiag[0])))
    else:
        rank = 0
    block = q_full
    block[:, :rank] *= np.sign(rdiag[:rank])
    tail = block[:, rank:]
    if tail.shape[1]:
        lead = np.argmax(np.abs(tail), axis=0)
        tail *= np.where(tail[lead, np.arange(tail.shape[1])] < 0.0, -1.0, 1.0)
    return block, rank


@dataclass(frozen=True)
class WaveletFactor:
    """One sparse orthogonal factor: merge blocks plus identity passthrough."""

    level: int
    matrix: sp.csr_matrix
    active_positions: np.ndarray  # positions touched by some block

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


_COEFF_DTYPE = np.dtype([("kind", np.int8), ("level", np.int16),
                         ("group", np.int32), ("local", np.int32)])
KIND_SCALING = 0
KIND_DETAIL = 1


@dataclass
class AlpertBasis:
    """Factored orthonormal wavelet operator bound to one hierarchy.

    ``coeff_index_map`` gives each coefficient position its meaning:
    kind (scaling/detail), level = index of the factor that fixes it
    (details of the deepest merges have level 1, the root's outputs
    level n_levels), owning group id and local index within the block.
    Positions never move between truncation levels, which is what makes
    warm starts across levels index-stable.
    """

    space: PolynomialSpace
    hierarchy: GroupHierarchy
    factors: list[WaveletFactor]
    coeff_index_map: np.ndarray

    @property
    def n(self) -> int:
        return self.hierarchy.n_points

    @property
    def n_levels(self) -> int:
        return len(self.factors)

    def apply(self, s: np.ndarray, j: int | None = None) -> np.ndarray:
        """(F_1 ... F_j) s, factors applied right to left; j defaults to full."""
        j = self._check_level(j)
        x = np.asarray(s, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {x.shape}")
        for jf in range(j, 0, -1):
            x = self.factors[jf - 1].matrix @ x
        return x

    def apply_transpose(self, f: np.ndarray, j: int | None = None) -> np.ndarray:
        """(F_1 ... F_j)^T f, transposed factors applied left to right."""
        j = self._check_level(j)
        x = np.asarray(f, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {x.shape}")
        for jf in range(1, j + 1):
            x = self.factors[jf - 1].matrix.T @ x
        return x

    def columns(self, indices: np.ndarray, j: int | None = None) -> sp.csc_matrix:
        """Sparse columns of the truncated operator, for building A blocks."""
        j = self._check_level(j)
        indices = np.asarray(indices, dtype=np.int64)
        t = indices.shape[0]
        x = sp.csc_matrix(
            (np.ones(t), (indices, np.arange(t))), shape=(self.n, t))
        for jf in range(j, 0, -1):
            x = self.factors[jf - 1].matrix @ x
        return sp.csc_matrix(x)

    def detail_positions(self, max_level: int | None = None) -> np.ndarray:
        """Positions of detail coefficients fixed at factor levels <= max_level."""
        cmap = self.coeff_index_map
        mask = cmap["kind"] == KIND_DETAIL
        if max_level is not None:
            mask &= cmap["level"] <= max_level
        return np.flatnonzero(mask)

    def scaling_positions(self) -> np.ndarray:
        """Positions of the coarsest-level scaling coefficients (count <= q)."""
        return np.flatnonzero(self.coeff_index_map["kind"] == KIND_SCALING)

    def canonical_order(self) -> np.ndarray:
        """Permutation listing coefficients in display order.

        Coarsest scaling first, then detail blocks from coarsest to
        finest merge round, groups in tree (preorder) id order, local
        indices last.  Purely presentational; the factors always act on
        raw positions.
        """
        cmap = self.coeff_index_map
        coarse_first = np.where(cmap["kind"] == KIND_SCALING,
                                np.int32(-1), -cmap["level"].astype(np.int32))
        return np.lexsort((cmap["local"], cmap["group"], coarse_first, cmap["kind"]))

    def _check_level(self, j: int | None) -> int:
        if j is None:
            return self.n_levels
        if not 1 <= j <= self.n_levels:
            raise ValueError(f"level must be in [1, {self.n_levels}], got {j}")
        return int(j)


def hierarchy_for_order(cloud: PointCloud, w: int) -> GroupHierarchy:
    """Hierarchy with the leaf capacity (2q) the order-w basis needs."""
    space = PolynomialSpace(w, cloud.dim)
    return build_hierarchy(cloud, space.leaf_capacity)


def build_basis(hierarchy: GroupHierarchy, w: int) -> AlpertBasis:
    """Build the factored basis bottom-up over the hierarchy.

    Every internal node yields one block; blocks of nodes at tree depth
    ``depth`` land in factor ``n_levels - depth``.  A hierarchy whose
    root is a leaf degenerates to a single full block.
    """
    cloud = hierarchy.cloud
    space = PolynomialSpace(w, cloud.dim)
    if hierarchy.leaf_capacity != space.leaf_capacity:
        raise ValueError(
            f"hierarchy leaf capacity {hierarchy.leaf_capacity} does not match "
            f"2q = {space.leaf_capacity} for w={w}, d={cloud.dim}")
    exponents = space.exponent_table()
    coords = cloud.coords
    n = hierarchy.n_points
    n_levels = max(hierarchy.depth, 1)

    cmap = np.zeros(n, dtype=_COEFF_DTYPE)
    blocks_per_level: list[list[tuple[np.ndarray, np.ndarray]]] = [[] for _ in range(n_levels)]

    # scaling synthesis matrix and coefficient positions per open node
    synth: dict[int, np.ndarray] = {}
    scal_pos: dict[int, np.ndarray] = {}

    def record_block(level: int, gathered: np.ndarray, block: np.ndarray, rank: int, node_id: int):
        blocks_per_level[level - 1].append((gathered, block))
        detail = gathered[rank:]
        cmap["kind"][detail] = KIND_DETAIL
        cmap["level"][detail] = level
        cmap["group"][detail] = node_id
        cmap["local"][detail] = np.arange(detail.shape[0])

    if hierarchy.root.is_leaf:
        # degenerate single-group basis: one full block over all points
        root = hierarchy.root
        wmat = _monomials(coords[root.indices], root.bbox_min, root.bbox_max, exponents)
        block, rank = _orthonormal_block(wmat)
        record_block(1, root.indices, block, rank, root.id)
        scal_pos[root.id] = root.indices[:rank]
    else:
        by_depth: dict[int, list] = {}
        for node in hierarchy.nodes:
            if not node.is_leaf:
                by_depth.setdefault(node.depth, []).append(node)
        for depth in sorted(by_depth, reverse=True):
            level = n_levels - depth
            for node in by_depth[depth]:
                parts_pos, parts_w, parts_synth = [], [], []
                for cid in (node.left, node.right):
                    child = hierarchy.nodes[cid]
                    mono = _monomials(coords[child.indices], node.bbox_min, node.bbox_max, exponents)
                    if child.is_leaf:
                        parts_pos.append(child.indices)
                        parts_w.append(mono)
                        parts_synth.append(None)
                    else:
                        u_child = synth.pop(cid)
                        parts_pos.append(scal_pos.pop(cid))
                        parts_w.append(u_child.T @ mono)
                        parts_synth.append(u_child)
                gathered = np.concatenate(parts_pos)
                block, rank = _orthonormal_block(np.vstack(parts_w))
                record_block(level, gathered, block, rank, node.id)
                scal_pos[node.id] = gathered[:rank]
                # synthesis of this node's scaling functions in point values
                row = 0
                pieces = []
                for pos, u_child in zip(parts_pos, parts_synth):
                    rows = block[row : row + pos.shape[0], :rank]
                    pieces.append(rows if u_child is None else u_child @ rows)
                    row += pos.shape[0]
                synth[node.id] = np.vstack(pieces)

    root_scal = scal_pos[hierarchy.root.id]
    cmap["kind"][root_scal] = KIND_SCALING
    cmap["level"][root_scal] = n_levels
    cmap["group"][root_scal] = hierarchy.root.id
    cmap["local"][root_scal] = np.arange(root_scal.shape[0])

    factors = []
    for level in range(1, n_levels + 1):
        factors.append(_assemble_factor(level, n, blocks_per_level[level - 1]))
    return AlpertBasis(space=space, hierarchy=hierarchy, factors=factors, coeff_index_map=cmap)


def _assemble_factor(level: int, n: int, blocks: list[tuple[np.ndarray, np.ndarray]]) -> WaveletFactor:
    rows, cols, vals = [], [], []
    active_mask = np.zeros(n, dtype=bool)
    for gathered, block in blocks:
        c = gathered.shape[0]
        rows.append(np.repeat(gathered, c))
        cols.append(np.tile(gathered, c))
        vals.append(block.ravel())
        active_mask[gathered] = True
    passive = np.flatnonzero(~active_mask)
    rows.append(passive)
    cols.append(passive)
    vals.append(np.ones(passive.shape[0]))
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    matrix.sum_duplicates()
    return WaveletFactor(level=level, matrix=matrix, active_positions=np.flatnonzero(active_mask))


def apply_basis(basis: AlpertBasis, s: np.ndarray, j: int | None = None) -> np.ndarray:
    """Field values (F_1 ... F_j) s; see AlpertBasis.apply."""
    return basis.apply(s, j)


def apply_basis_transpose(basis: AlpertBasis, f: np.ndarray, j: int | None = None) -> np.ndarray:
    """Coefficients (F_1 ... F_j)^T f; see AlpertBasis.apply_transpose."""
    return basis.apply_transpose(f, j)
