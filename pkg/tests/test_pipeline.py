"""End-to-end reconstruction paths: single level, coarse-to-fine, partitioned."""

import warnings

import numpy as np
import pytest

from meshcs import (BernoulliSpec, PointCloud, ReconstructionReport,
                    StompConfig, ZeroReferenceWarning, build_basis,
                    clod_levels, error_norm, hierarchy_for_order, make_bundle,
                    partition_cloud, reconstruct_at_level, reconstruct_clod,
                    reconstruct_full, reconstruct_partitioned,
                    write_report_csv)
from meshcs.pipeline import reconstruct_partitioned_report


def random_cloud(n, d=2, seed=0):
    rng = np.random.default_rng(seed)
    return PointCloud(rng.random((n, d)))


def sparse_field(cloud, w, k, seed):
    """Field that is exactly k-sparse in the order-w detail basis."""
    basis = build_basis(hierarchy_for_order(cloud, w), w)
    rng = np.random.default_rng(seed)
    s = np.zeros(cloud.n_points)
    idx = rng.choice(cloud.n_points, size=k, replace=False)
    s[idx] = rng.uniform(1.0, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    f = basis.apply(s, basis.n_levels)
    return basis, s, f


def test_error_norm_is_relative_l2():
    assert error_norm(np.array([3.0, 4.0]), np.array([3.0, 0.0])) == pytest.approx(0.8)
    assert error_norm(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0


def test_error_norm_zero_reference_warns_and_goes_absolute():
    with pytest.warns(ZeroReferenceWarning):
        e = error_norm(np.zeros(3), np.array([0.0, 3.0, 4.0]))
    assert e == pytest.approx(5.0)


def test_clod_levels_schedules():
    assert clod_levels(11, 2) == [1, 3, 5, 7, 9, 11]
    assert clod_levels(11, 4) == [1, 5, 9, 11]
    assert clod_levels(11, 8) == [1, 9, 11]
    assert clod_levels(1, 3) == [1]
    assert clod_levels(6, 2) == [1, 3, 5, 6]


def test_clod_levels_validation():
    with pytest.raises(ValueError):
        clod_levels(0, 2)
    with pytest.raises(ValueError):
        clod_levels(5, 0)


def test_full_reconstruction_recovers_sparse_field():
    cloud = random_cloud(256, seed=7)
    basis, s_true, f = sparse_field(cloud, w=2, k=8, seed=8)
    bundle = make_bundle(f, BernoulliSpec(256, 160, seed=123), "demo")
    f_r, s_r, res = reconstruct_full(bundle, cloud, w=2, basis=basis)
    assert res.converged
    assert error_norm(f, f_r) < 1e-8
    assert np.linalg.norm(s_r - s_true) < 1e-8 * np.linalg.norm(s_true)


def test_warm_start_at_truth_uses_no_stages():
    cloud = random_cloud(200, seed=9)
    basis, s_true, f = sparse_field(cloud, w=2, k=6, seed=10)
    bundle = make_bundle(f, BernoulliSpec(200, 140, seed=11), "demo")
    _, _, res = reconstruct_at_level(bundle, cloud, w=2, j=basis.n_levels,
                                     warm_start=s_true, basis=basis)
    assert res.converged
    assert res.stages_used == 0


def test_clod_report_shape_and_final_level():
    cloud = random_cloud(300, seed=12)
    basis, _, f = sparse_field(cloud, w=2, k=10, seed=13)
    bundle = make_bundle(f, BernoulliSpec(300, 200, seed=14), "demo")
    report = reconstruct_clod(bundle, cloud, w=2, stride=2, basis=basis,
                              reference=f)
    schedule = clod_levels(basis.n_levels, 2)
    assert report.levels.tolist() == schedule
    assert report.seconds.shape == (len(schedule),)
    assert report.stages.shape == (len(schedule),)
    assert report.converged.dtype == bool
    assert report.errors is not None
    assert report.f_r.shape == (300,)
    assert report.final_error == pytest.approx(error_norm(f, report.f_r))
    assert report.errors[-1] < 1e-6


def test_clod_without_reference_has_no_errors():
    cloud = random_cloud(128, seed=15)
    basis, _, f = sparse_field(cloud, w=2, k=5, seed=16)
    bundle = make_bundle(f, BernoulliSpec(128, 90, seed=17), "demo")
    report = reconstruct_clod(bundle, cloud, w=2, stride=3, basis=basis)
    assert report.errors is None
    assert report.final_error is None


def test_partitioned_result_is_order_independent():
    cloud = random_cloud(600, seed=18)
    parts = partition_cloud(cloud, 4)
    rng = np.random.default_rng(19)
    f = np.sin(6.0 * cloud.coords[:, 0]) + 0.3 * rng.standard_normal(600)
    bundles = []
    for p in parts:
        sub = f[p.start:p.stop]
        spec = BernoulliSpec(sub.size, max(1, sub.size // 2), seed=20 + p.rank_id)
        bundles.append(make_bundle(sub, spec, "demo", rank_id=p.rank_id))
    f_fwd = reconstruct_partitioned(bundles, cloud, parts, w=3)
    shuffled = [bundles[i] for i in (2, 0, 3, 1)]
    f_shuf = reconstruct_partitioned(shuffled, cloud, parts, w=3)
    assert np.array_equal(f_fwd, f_shuf)
    assert f_fwd.shape == (600,)


def test_partitioned_report_carries_per_rank_metrics():
    cloud = random_cloud(240, seed=21)
    parts = partition_cloud(cloud, 3)
    f = cloud.coords[:, 0] ** 2
    bundles = [make_bundle(f[p.start:p.stop],
                           BernoulliSpec(p.stop - p.start, 60, seed=30 + p.rank_id),
                           "demo", rank_id=p.rank_id)
               for p in parts]
    f_r, reports = reconstruct_partitioned_report(bundles, cloud, parts, w=2,
                                                  reference=f)
    assert len(reports) == 3
    for rep in reports:
        assert rep.errors is not None
        assert rep.errors.shape == (1,)
    assert f_r.shape == (240,)


def test_partitioned_rejects_wrong_bundle_count():
    cloud = random_cloud(100, seed=22)
    parts = partition_cloud(cloud, 2)
    f = np.ones(100)
    bundles = [make_bundle(f[:50], BernoulliSpec(50, 25, seed=1), "demo", rank_id=0)]
    with pytest.raises(ValueError):
        reconstruct_partitioned(bundles, cloud, parts, w=2)


def test_partitioned_rejects_size_mismatch():
    cloud = random_cloud(100, seed=23)
    parts = partition_cloud(cloud, 2)
    bundles = [make_bundle(np.ones(40), BernoulliSpec(40, 20, seed=1), "demo",
                           rank_id=p.rank_id) for p in parts]
    with pytest.raises(ValueError):
        reconstruct_partitioned(bundles, cloud, parts, w=2)


def test_level_reconstruction_rejects_bundle_cloud_mismatch():
    cloud = random_cloud(64, seed=24)
    bundle = make_bundle(np.ones(80), BernoulliSpec(80, 40, seed=2), "demo")
    with pytest.raises(ValueError):
        reconstruct_at_level(bundle, cloud, w=2, j=1)


def test_report_csv_roundtrip(tmp_path):
    report = ReconstructionReport(
        f_r=np.zeros(4),
        levels=np.array([1, 3, 5]),
        seconds=np.array([0.125, 0.25, 0.0625]),
        stages=np.array([4, 2, 1]),
        converged=np.array([True, True, False]),
        errors=np.array([0.5, 0.125, 0.03125]))
    path = tmp_path / "report.csv"
    write_report_csv(report, path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "level,error,seconds,stages"
    body = np.array([r.split(",") for r in rows[1:]])
    assert body.shape[0] == 3
    assert [int(v) for v in body[:, 0]] == [1, 3, 5]
    assert np.array_equal([float(v) for v in body[:, 1]], report.errors)
    assert np.array_equal([float(v) for v in body[:, 2]], report.seconds)
    assert [int(v) for v in body[:, 3]] == [4, 2, 1]
