"""Implicit seeded Bernoulli sampling matrix and the compressed bundle.

The M x N sampling matrix Phi has entries sigma(i, k) / sqrt(M) with
sigma in {+1, -1} drawn by a counter-based generator (a SplitMix64
finalizer of the flat entry counter i*N + k).  Any entry is O(1) to
evaluate, so Phi and Phi^T apply equally cheaply and the matrix itself
never needs to be stored or transmitted: the 64-bit seed reproduces it
exactly on any platform.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BundleFormatError",
    "BernoulliSpec",
    "SampleBundle",
    "BernoulliSampler",
    "IdentitySampler",
    "sample_field",
    "apply_sampler_transpose",
    "choose_sample_count",
    "derive_rank_seed",
    "write_bundle",
    "read_bundle",
]

_U64 = np.uint64
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# row blocks sized so the transient uint64 buffer stays around 64 MB
_BLOCK_BYTES = 64 << 20


class BundleFormatError(Exception):
    """Raised when a sample bundle file is malformed."""


def _mix_u64(value: int) -> int:
    """SplitMix64 finalizer on a plain integer, modulo 2^64."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_rank_seed(seed: int, rank_id: int) -> int:
    """Per-rank seed: position rank_id + 1 of the SplitMix64 stream at ``seed``.

    Keeps partitions statistically independent while derivable from the
    one master seed, so ranks never need to coordinate.
    """
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must fit in 64 unsigned bits")
    if rank_id < 0:
        raise ValueError("rank_id must be non-negative")
    return _mix_u64(seed + (rank_id + 1) * _GOLDEN)


@dataclass(frozen=True)
class BernoulliSpec:
    """Dimensions and seed that fully determine one sampling matrix."""

    n: int
    m: int
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")
        if self.m < 1:
            raise ValueError(f"need m >= 1, got {self.m}")
        if self.m > self.n:
            raise ValueError(f"not compressive: m={self.m} exceeds n={self.n}")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must fit in 64 unsigned bits")


def _sign_block(seed: int, n: int, rows: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
    """Signs sigma(i, k) as an int8 array of shape (len(rows), len(cols))."""
    r = rows.astype(np.uint64)[:, None]
    if cols is None:
        k = np.arange(n, dtype=np.uint64)[None, :]
    else:
        k = cols.astype(np.uint64)[None, :]
    z = _U64(seed) + (r * _U64(n) + k) * _U64(_GOLDEN)
    z ^= z >> _U64(30)
    z *= _U64(_MIX1)
    z ^= z >> _U64(27)
    z *= _U64(_MIX2)
    z ^= z >> _U64(31)
    return np.where((z >> _U64(63)) == _U64(0), np.int8(1), np.int8(-1))


class BernoulliSampler:
    """Applies Phi, Phi^T and column extraction for one BernoulliSpec.

    Signs are cached as int8 when the full table fits in ``cache_bytes``;
    otherwise every apply regenerates them block by block, trading time
    for bounded memory.
    """

    def __init__(self, spec: BernoulliSpec, cache_bytes: int = 256 << 20):
        self.spec = spec
        self.scale = 1.0 / np.sqrt(spec.m)
        self._cache_bytes = cache_bytes
        self._signs: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    def _cached_signs(self) -> np.ndarray | None:
        if self._signs is None and self.m * self.n <= self._cache_bytes:
            self._signs = _sign_block(self.spec.seed, self.n, np.arange(self.m))
        return self._signs

    def _row_blocks(self, width: int):
        step = max(1, _BLOCK_BYTES // (8 * max(width, 1)))
        for start in range(0, self.m, step):
            yield start, min(start + step, self.m)

    def matvec(self, f: np.ndarray) -> np.ndarray:
        """y = Phi f."""
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.n,):
            raise ValueError(f"field length {f.shape} does not match n={self.n}")
        signs = self._cached_signs()
        y = np.empty(self.m)
        for a, b in self._row_blocks(self.n):
            block = signs[a:b] if signs is not None else _sign_block(self.spec.seed, self.n, np.arange(a, b))
            y[a:b] = block.astype(np.float64) @ f
        return y * self.scale

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        """Phi^T v."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.m,):
            raise ValueError(f"vector length {v.shape} does not match m={self.m}")
        signs = self._cached_signs()
        out = np.zeros(self.n)
        for a, b in self._row_blocks(self.n):
            block = signs[a:b] if signs is not None else _sign_block(self.spec.seed, self.n, np.arange(a, b))
            out += block.astype(np.float64).T @ v[a:b]
        return out * self.scale

    def matmat(self, fmat: np.ndarray) -> np.ndarray:
        """Phi applied to an (n, t) column block."""
        fmat = np.asarray(fmat, dtype=np.float64)
        if fmat.ndim != 2 or fmat.shape[0] != self.n:
            raise ValueError(f"expected shape ({self.n}, t), got {fmat.shape}")
        signs = self._cached_signs()
        out = np.empty((self.m, fmat.shape[1]))
        for a, b in self._row_blocks(self.n):
            block = signs[a:b] if signs is not None else _sign_block(self.spec.seed, self.n, np.arange(a, b))
            out[a:b] = block.astype(np.float64) @ fmat
        return out * self.scale

    def columns(self, indices: np.ndarray) -> np.ndarray:
        """Dense (m, len(indices)) block of Phi columns."""
        indices = np.asarray(indices, dtype=np.int64)
        signs = self._cached_signs()
        if signs is not None:
            return signs[:, indices].astype(np.float64) * self.scale
        out = np.empty((self.m, indices.shape[0]))
        for a, b in self._row_blocks(indices.shape[0]):
            out[a:b] = _sign_block(self.spec.seed, self.n, np.arange(a, b), indices)
        return out * self.scale

    def dense(self) -> np.ndarray:
        """Explicit Phi as float64; only sensible for small n, m."""
        return _sign_block(self.spec.seed, self.n, np.arange(self.m)).astype(np.float64) * self.scale


class IdentitySampler:
    """Orthonormal stand-in for Phi with M = N; a test hook.

    With this sampler the inverse problem is fully determined, which
    isolates basis and solver behavior from sampling noise.
    """

    def __init__(self, n: int):
        self.n = n
        self.m = n

    def matvec(self, f):
        return np.asarray(f, dtype=np.float64).copy()

    def rmatvec(self, v):
        return np.asarray(v, dtype=np.float64).copy()

    def matmat(self, fmat):
        return np.asarray(fmat, dtype=np.float64).copy()

    def columns(self, indices):
        out = np.zeros((self.n, len(indices)))
        out[np.asarray(indices, dtype=np.int64), np.arange(len(indices))] = 1.0
        return out

    def dense(self):
        return np.eye(self.n)


def sample_field(f: np.ndarray, spec: BernoulliSpec) -> np.ndarray:
    """y = Phi f for the implicit matrix defined by ``spec``."""
    return BernoulliSampler(spec).matvec(f)


def apply_sampler_transpose(v: np.ndarray, spec: BernoulliSpec) -> np.ndarray:
    """Phi^T v for the implicit matrix defined by ``spec``."""
    return BernoulliSampler(spec).rmatvec(v)


def choose_sample_count(n: int, k_est: int, c: float = 4.0) -> int:
    """Sample count M = min(N, ceil(C * K * log2(N / K))).

    The C*K*log2(N/K) rule is the usual compressive-sensing sample
    budget; C defaults to a conservative 4.
    """
    if not 1 <= k_est < n:
        raise ValueError(f"need 1 <= k_est < n, got k_est={k_est}, n={n}")
    if c <= 0:
        raise ValueError(f"need c > 0, got {c}")
    m = int(np.ceil(c * k_est * np.log2(n / k_est)))
    return min(n, max(1, m))


# ---------------------------------------------------------------------------
# bundle file format
# ---------------------------------------------------------------------------

_BUNDLE_MAGIC = b"MCSB"
_BUNDLE_VERSION = 1


@dataclass(frozen=True)
class SampleBundle:
    """The compressed artifact: seed, dimensions and the sample vector."""

    name: str
    rank_id: int
    n: int
    m: int
    seed: int
    samples: np.ndarray

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.shape != (self.m,):
            raise ValueError(f"expected {self.m} samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        BernoulliSpec(self.n, self.m, self.seed)  # reuse dimension/seed validation
        if self.rank_id < 0:
            raise ValueError("rank_id must be non-negative")
        object.__setattr__(self, "samples", samples)

    @property
    def ratio(self) -> float:
        """Compression ratio R = N / M."""
        return self.n / self.m

    @property
    def spec(self) -> BernoulliSpec:
        return BernoulliSpec(self.n, self.m, self.seed)


def make_bundle(f: np.ndarray, spec: BernoulliSpec, name: str, rank_id: int = 0) -> SampleBundle:
    """Sample a field and wrap the result with its reproduction metadata."""
    y = sample_field(f, spec)
    return SampleBundle(name=name, rank_id=rank_id, n=spec.n, m=spec.m, seed=spec.seed, samples=y)


def write_bundle(path, bundle: SampleBundle) -> None:
    """Write one bundle in the little-endian binary format."""
    name_bytes = bundle.name.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_BUNDLE_MAGIC)
        fh.write(struct.pack("<I", _BUNDLE_VERSION))
        fh.write(struct.pack("<I", len(name_bytes)))
        fh.write(name_bytes)
        fh.write(struct.pack("<IQQQ", bundle.rank_id, bundle.n, bundle.m, bundle.seed))
        fh.write(bundle.samples.astype("<f8").tobytes())


def read_bundle(path) -> SampleBundle:
    """Read and validate a bundle file."""
    with open(path, "rb") as fh:
        data = fh.read()

    def take(fmt: str, offset: int):
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise BundleFormatError(f"{path}: truncated file")
        return struct.unpack_from(fmt, data, offset), offset + size

    if data[:4] != _BUNDLE_MAGIC:
        raise BundleFormatError(f"{path}: bad magic {data[:4]!r}")
    (version,), pos = take("<I", 4)
    if version != _BUNDLE_VERSION:
        raise BundleFormatError(f"{path}: unsupported version {version}")
    (name_len,), pos = take("<I", pos)
    if pos + name_len > len(data):
        raise BundleFormatError(f"{path}: truncated name")
    try:
        name = data[pos : pos + name_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BundleFormatError(f"{path}: name is not valid UTF-8") from exc
    pos += name_len
    (rank_id, n, m, seed), pos = take("<IQQQ", pos)
    expected = pos + 8 * m
    if len(data) != expected:
        raise BundleFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    samples = np.frombuffer(data, dtype="<f8", count=m, offset=pos).astype(np.float64)
    if not np.all(np.isfinite(samples)):
        raise BundleFormatError(f"{path}: non-finite samples")
    try:
        return SampleBundle(name=name, rank_id=rank_id, n=n, m=m, seed=seed, samples=samples)
    except ValueError as exc:
        raise BundleFormatError(f"{path}: {exc}") from exc
