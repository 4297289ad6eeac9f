"""Sampling matrix: sign rule, dense oracle, adjoint, bundle files."""

import subprocess
import sys

import numpy as np
import pytest

from meshcs import (BernoulliSampler, BernoulliSpec, BundleFormatError, IdentitySampler,
                    SampleBundle, apply_sampler_transpose, choose_sample_count,
                    derive_rank_seed, make_bundle, read_bundle, sample_field,
                    write_bundle)

MASK = (1 << 64) - 1


def sign_reference(seed, i, k, n):
    # independent re-derivation of the counter mix, in pure python ints
    c = (i * n + k) & MASK
    z = (seed + c * 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    z ^= z >> 31
    return 1.0 if (z >> 63) == 0 else -1.0


def test_sign_rule_matches_pure_python_reference():
    spec = BernoulliSpec(n=13, m=7, seed=0xDEADBEEF12345678)
    dense = BernoulliSampler(spec).dense() * np.sqrt(spec.m)
    for i in range(spec.m):
        for k in range(spec.n):
            assert dense[i, k] == sign_reference(spec.seed, i, k, spec.n)


def test_matvec_matches_dense_product():
    rng = np.random.default_rng(7)
    spec = BernoulliSpec(n=64, m=23, seed=99)
    sampler = BernoulliSampler(spec)
    phi = sampler.dense()
    f = rng.standard_normal(64)
    y = sampler.matvec(f)
    assert y.shape == (23,)
    assert np.max(np.abs(y - phi @ f)) < 1e-14 * np.max(np.abs(f)) * 64


def test_rmatvec_matmat_columns_match_dense():
    rng = np.random.default_rng(8)
    spec = BernoulliSpec(n=40, m=17, seed=5)
    sampler = BernoulliSampler(spec)
    phi = sampler.dense()
    v = rng.standard_normal(17)
    assert np.allclose(sampler.rmatvec(v), phi.T @ v, atol=1e-13)
    fmat = rng.standard_normal((40, 3))
    assert np.allclose(sampler.matmat(fmat), phi @ fmat, atol=1e-13)
    idx = np.array([0, 5, 39, 5])
    assert np.allclose(sampler.columns(idx), phi[:, idx], atol=0)


def test_adjoint_identity():
    rng = np.random.default_rng(9)
    spec = BernoulliSpec(n=200, m=60, seed=123456789)
    sampler = BernoulliSampler(spec)
    f = rng.standard_normal(200)
    v = rng.standard_normal(60)
    lhs = np.dot(sampler.matvec(f), v)
    rhs = np.dot(f, sampler.rmatvec(v))
    assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)


def test_blocked_path_agrees_with_cached_path():
    # cache_bytes=0 forces the streaming row-block path
    rng = np.random.default_rng(10)
    spec = BernoulliSpec(n=300, m=90, seed=42)
    cached = BernoulliSampler(spec)
    blocked = BernoulliSampler(spec, cache_bytes=0)
    f = rng.standard_normal(300)
    v = rng.standard_normal(90)
    assert np.allclose(cached.matvec(f), blocked.matvec(f), rtol=1e-13)
    assert np.allclose(cached.rmatvec(v), blocked.rmatvec(v), rtol=1e-13)


def test_distinct_seeds_give_distinct_patterns():
    a = BernoulliSampler(BernoulliSpec(64, 16, seed=1)).dense()
    b = BernoulliSampler(BernoulliSpec(64, 16, seed=2)).dense()
    assert not np.array_equal(a, b)


def test_sample_field_and_transpose_helpers():
    rng = np.random.default_rng(11)
    spec = BernoulliSpec(n=50, m=20, seed=77)
    f = rng.standard_normal(50)
    v = rng.standard_normal(20)
    sampler = BernoulliSampler(spec)
    assert np.array_equal(sample_field(f, spec), sampler.matvec(f))
    assert np.array_equal(apply_sampler_transpose(v, spec), sampler.rmatvec(v))


def test_identity_sampler_passthrough():
    rng = np.random.default_rng(12)
    ident = IdentitySampler(6)
    f = rng.standard_normal(6)
    assert np.array_equal(ident.matvec(f), f)
    assert np.array_equal(ident.rmatvec(f), f)
    assert np.array_equal(ident.columns(np.array([2, 4])), np.eye(6)[:, [2, 4]])
    assert np.array_equal(ident.dense(), np.eye(6))


def test_derive_rank_seed_matches_mix_and_is_distinct():
    def mix(value):
        z = value & MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    base = 20260825
    seeds = [derive_rank_seed(base, r) for r in range(8)]
    for r, s in enumerate(seeds):
        assert s == mix(base + (r + 1) * 0x9E3779B97F4A7C15)
        assert 0 <= s < 1 << 64
    assert len(set(seeds)) == 8


@pytest.mark.parametrize("n,k,c,expected", [
    (1024, 20, 4.0, 455),
    (10, 1, 1.0, 4),
    (100, 60, 4.0, 100),   # capped at n
])
def test_choose_sample_count(n, k, c, expected):
    assert choose_sample_count(n, k, c) == expected


def test_choose_sample_count_rejects_bad_sparsity():
    with pytest.raises(ValueError):
        choose_sample_count(100, 0)
    with pytest.raises(ValueError):
        choose_sample_count(100, 200)


def test_spec_validation():
    with pytest.raises(ValueError):
        BernoulliSpec(n=10, m=0, seed=0)
    with pytest.raises(ValueError):
        BernoulliSpec(n=10, m=11, seed=0)
    with pytest.raises(ValueError):
        BernoulliSpec(n=10, m=5, seed=1 << 64)
    with pytest.raises(ValueError):
        BernoulliSpec(n=10, m=5, seed=-1)


def test_bundle_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    f = rng.standard_normal(30)
    spec = BernoulliSpec(n=30, m=12, seed=987654321)
    bundle = make_bundle(f, spec, "pressure", rank_id=3)
    path = tmp_path / "a.mcsb"
    write_bundle(path, bundle)
    back = read_bundle(path)
    assert back.name == "pressure"
    assert back.rank_id == 3
    assert (back.n, back.m, back.seed) == (30, 12, 987654321)
    assert np.array_equal(back.samples, bundle.samples)
    assert back.ratio == pytest.approx(30 / 12)


def test_bundle_rejects_corrupt_files(tmp_path):
    f = np.ones(8)
    bundle = make_bundle(f, BernoulliSpec(8, 4, seed=1), "x")
    path = tmp_path / "b.mcsb"
    write_bundle(path, bundle)
    raw = path.read_bytes()
    (tmp_path / "trunc.mcsb").write_bytes(raw[:-9])
    with pytest.raises(BundleFormatError):
        read_bundle(tmp_path / "trunc.mcsb")
    (tmp_path / "magic.mcsb").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BundleFormatError):
        read_bundle(tmp_path / "magic.mcsb")


def test_bundle_bytes_reproducible_across_processes(tmp_path):
    snippet = (
        "import sys, numpy as np\n"
        "from meshcs import BernoulliSpec, make_bundle, write_bundle\n"
        "rng = np.random.default_rng(2026)\n"
        "f = rng.standard_normal(400)\n"
        "b = make_bundle(f, BernoulliSpec(400, 50, seed=31337), 'demo', rank_id=1)\n"
        "write_bundle(sys.argv[1], b)\n"
    )
    paths = [tmp_path / "run1.mcsb", tmp_path / "run2.mcsb"]
    for p in paths:
        subprocess.run([sys.executable, "-c", snippet, str(p)], check=True)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_bundle_field_length_must_match_spec():
    with pytest.raises(ValueError):
        make_bundle(np.ones(9), BernoulliSpec(8, 4, seed=1), "x")


def test_sample_bundle_sample_count_validated():
    with pytest.raises(ValueError):
        SampleBundle(name="x", rank_id=0, n=8, m=4, seed=1, samples=np.ones(5))
