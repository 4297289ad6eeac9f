"""End-to-end reconstruction: compose Phi and Psi, run the solver.

Reconstruction at detail level j solves y = Phi Psi_(j) s for sparse s
and returns Psi_(j) s.  The level-by-level variant warm-starts each
solve from the previous level's coefficients, which works because
coefficient positions are stable across levels.  Partitioned clouds
reconstruct rank by rank with nothing shared.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .basis import AlpertBasis, build_basis, hierarchy_for_order
from .mesh import Partition, PointCloud
from .sampler import BernoulliSampler, SampleBundle
from .stomp import StompConfig, StompResult, stomp_solve

__all__ = [
    "ZeroReferenceWarning",
    "ReconstructionReport",
    "error_norm",
    "reconstruct_at_level",
    "reconstruct_full",
    "reconstruct_clod",
    "reconstruct_partitioned",
    "reconstruct_partitioned_report",
    "write_report_csv",
]

_COLUMN_BATCH_BYTES = 64 << 20


class ZeroReferenceWarning(UserWarning):
    """Signals that error_norm fell back to an absolute norm."""


def error_norm(f: np.ndarray, f_r: np.ndarray) -> float:
    """Normalized L2 error ||f - f_r|| / ||f||.

    A zero reference makes the ratio undefined; then the absolute error
    is returned and a ZeroReferenceWarning is issued.
    """
    f = np.asarray(f, dtype=np.float64)
    f_r = np.asarray(f_r, dtype=np.float64)
    if f.shape != f_r.shape:
        raise ValueError(f"length mismatch: {f.shape} vs {f_r.shape}")
    diff = float(np.linalg.norm(f - f_r))
    ref = float(np.linalg.norm(f))
    if ref == 0.0:
        warnings.warn("reference field has zero norm; returning absolute error",
                      ZeroReferenceWarning)
        return diff
    return diff / ref


@dataclass(frozen=True)
class ReconstructionReport:
    """Reconstructed field plus one record per solved level."""

    f_r: np.ndarray
    levels: np.ndarray
    seconds: np.ndarray
    stages: np.ndarray
    converged: np.ndarray
    errors: np.ndarray | None = None

    @property
    def final_converged(self) -> bool:
        return bool(self.converged[-1])

    @property
    def final_error(self) -> float | None:
        return None if self.errors is None else float(self.errors[-1])


def _operator_parts(sampler, basis: AlpertBasis, j: int):
    """apply_A, apply_At and a dense column extractor for A = Phi Psi_(j)."""

    def apply_a(s):
        return sampler.matvec(basis.apply(s, j))

    def apply_at(v):
        return basis.apply_transpose(sampler.rmatvec(v), j)

    def columns(indices):
        cols = basis.columns(indices, j)
        out = np.empty((sampler.m, indices.shape[0]))
        step = max(1, _COLUMN_BATCH_BYTES // (8 * basis.n))
        for a in range(0, indices.shape[0], step):
            out[:, a : a + step] = sampler.matmat(cols[:, a : a + step].toarray())
        return out

    return apply_a, apply_at, columns


def _prepare(bundle: SampleBundle, cloud: PointCloud, w: int,
             basis: AlpertBasis | None, sampler) -> tuple[AlpertBasis, object]:
    if bundle.n != cloud.n_points:
        raise ValueError(f"bundle/cloud N mismatch: {bundle.n} vs {cloud.n_points}")
    if basis is None:
        basis = build_basis(hierarchy_for_order(cloud, w), w)
    elif basis.space.w != w or basis.n != cloud.n_points:
        raise ValueError("provided basis does not match cloud and order")
    if sampler is None:
        sampler = BernoulliSampler(bundle.spec)
    return basis, sampler


def reconstruct_at_level(bundle: SampleBundle, cloud: PointCloud, w: int, j: int,
                         warm_start: np.ndarray | None = None, *,
                         stomp: StompConfig | None = None,
                         basis: AlpertBasis | None = None,
                         sampler=None) -> tuple[np.ndarray, np.ndarray, StompResult]:
    """Solve one level; returns (field, coefficients, solver result).

    ``basis`` and ``sampler`` are rebuildable from the inputs and exist
    as parameters only so sweeps and level loops can reuse them; the
    sampler parameter doubles as the orthonormal-sampler test hook.
    """
    basis, sampler = _prepare(bundle, cloud, w, basis, sampler)
    config = stomp or StompConfig()
    if warm_start is not None:
        config = replace(config, initial_guess=warm_start)
    apply_a, apply_at, columns = _operator_parts(sampler, basis, j)
    result = stomp_solve(apply_a, apply_at, bundle.samples, config, columns=columns)
    return basis.apply(result.s, j), result.s, result


def reconstruct_full(bundle: SampleBundle, cloud: PointCloud, w: int, *,
                     stomp: StompConfig | None = None,
                     basis: AlpertBasis | None = None,
                     sampler=None) -> tuple[np.ndarray, np.ndarray, StompResult]:
    """Reconstruction at the deepest detail level."""
    basis, sampler = _prepare(bundle, cloud, w, basis, sampler)
    return reconstruct_at_level(bundle, cloud, w, basis.n_levels,
                                stomp=stomp, basis=basis, sampler=sampler)


def clod_levels(n_levels: int, stride: int) -> list[int]:
    """Level schedule 1, 1+stride, ...; always ends at the deepest level."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if n_levels < 1:
        raise ValueError(f"n_levels must be >= 1, got {n_levels}")
    levels = list(range(1, n_levels + 1, stride))
    if levels[-1] != n_levels:
        levels.append(n_levels)
    return levels


def reconstruct_clod(bundle: SampleBundle, cloud: PointCloud, w: int, stride: int = 2, *,
                     stomp: StompConfig | None = None,
                     basis: AlpertBasis | None = None,
                     sampler=None,
                     reference: np.ndarray | None = None) -> ReconstructionReport:
    """Level-by-level reconstruction with warm starts.

    Each level's coefficient vector seeds the next solve; per-level
    error (against ``reference`` when given), wall time and stage count
    are recorded.  The returned field is the deepest level's.
    """
    basis, sampler = _prepare(bundle, cloud, w, basis, sampler)
    levels = clod_levels(basis.n_levels, stride)
    seconds, stages, converged, errors = [], [], [], []
    warm = None
    f_r = np.zeros(cloud.n_points)
    for j in levels:
        t0 = time.perf_counter()
        f_r, coeffs, result = reconstruct_at_level(
            bundle, cloud, w, j, warm_start=warm, stomp=stomp, basis=basis, sampler=sampler)
        seconds.append(time.perf_counter() - t0)
        stages.append(result.stages_used)
        converged.append(result.converged)
        if reference is not None:
            errors.append(error_norm(reference, f_r))
        warm = coeffs
    return ReconstructionReport(
        f_r=f_r, levels=np.array(levels), seconds=np.array(seconds),
        stages=np.array(stages), converged=np.array(converged),
        errors=np.array(errors) if reference is not None else None)


def reconstruct_partitioned_report(bundles: list[SampleBundle], cloud: PointCloud,
                                   partitions: list[Partition], w: int,
                                   j: int | str = "full", *,
                                   stomp: StompConfig | None = None,
                                   reference: np.ndarray | None = None,
                                   ) -> tuple[np.ndarray, list[ReconstructionReport]]:
    """Per-partition reconstruction with one single-level report per rank.

    Every partition gets its own hierarchy and basis over its sub-cloud
    and is solved independently, so processing order cannot affect the
    result.
    """
    if len(bundles) != len(partitions):
        raise ValueError(f"{len(bundles)} bundles for {len(partitions)} partitions")
    by_rank: dict[int, SampleBundle] = {}
    for bundle in bundles:
        if bundle.rank_id in by_rank:
            raise ValueError(f"duplicate rank_id {bundle.rank_id}")
        by_rank[bundle.rank_id] = bundle
    out = np.empty(cloud.n_points)
    reports = []
    for part in partitions:
        bundle = by_rank.get(part.rank_id)
        if bundle is None:
            raise ValueError(f"missing bundle for rank {part.rank_id}")
        if bundle.n != part.size:
            raise ValueError(
                f"rank {part.rank_id}: bundle N={bundle.n} does not match partition size {part.size}")
        sub = cloud.subset(part.indices)
        basis = build_basis(hierarchy_for_order(sub, w), w)
        level = basis.n_levels if j == "full" else int(j)
        t0 = time.perf_counter()
        f_r, _, result = reconstruct_at_level(bundle, sub, w, level, stomp=stomp, basis=basis)
        elapsed = time.perf_counter() - t0
        out[part.start : part.stop] = f_r
        err = None
        if reference is not None:
            err = error_norm(reference[part.start : part.stop], f_r)
        reports.append(ReconstructionReport(
            f_r=f_r, levels=np.array([level]), seconds=np.array([elapsed]),
            stages=np.array([result.stages_used]), converged=np.array([result.converged]),
            errors=None if err is None else np.array([err])))
    return out, reports


def reconstruct_partitioned(bundles: list[SampleBundle], cloud: PointCloud,
                            partitions: list[Partition], w: int,
                            j: int | str = "full", *,
                            stomp: StompConfig | None = None) -> np.ndarray:
    """Assembled global field from independent per-partition solves."""
    out, _ = reconstruct_partitioned_report(bundles, cloud, partitions, w, j, stomp=stomp)
    return out


def write_report_csv(report: ReconstructionReport, path) -> None:
    """Level records as CSV: level, error, seconds, stages."""
    import csv

    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "error", "seconds", "stages"])
        for i, level in enumerate(report.levels):
            err = "" if report.errors is None else format(report.errors[i], ".17g")
            writer.writerow([int(level), err,
                             format(report.seconds[i], ".17g"), int(report.stages[i])])
