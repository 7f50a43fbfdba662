"""Element selection, sparsity and the training-time sparse & noise augmentation.

Missing elements are zero-filled so every snapshot keeps length N.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .seeding import as_generator

NOISELESS = float("inf")


@dataclass(frozen=True, eq=False)
class SparseMask:
    """Boolean observation pattern; ``observed[n]`` is True when element n is present."""

    observed: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=bool).ravel().copy()
        if obs.size < 1:
            raise InvalidArgumentError("mask must have at least one element")
        if not obs.any():
            raise InvalidArgumentError("mask must observe at least one element")
        obs.setflags(write=False)
        object.__setattr__(self, "observed", obs)

    @classmethod
    def from_missing(cls, n, missing):
        missing = np.asarray(list(missing), dtype=np.int64)
        if missing.size and (missing.min() < 0 or missing.max() >= n):
            raise InvalidArgumentError(f"missing indices must lie in [0, {n})")
        if np.unique(missing).size != missing.size:
            raise InvalidArgumentError("missing indices must be distinct")
        obs = np.ones(n, dtype=bool)
        obs[missing] = False
        return cls(obs)

    @property
    def n(self):
        return self.observed.shape[0]

    @property
    def m_count(self):
        return int(self.observed.sum())

    @property
    def missing(self):
        return np.flatnonzero(~self.observed)

    def __eq__(self, other):
        return isinstance(other, SparseMask) and np.array_equal(self.observed, other.observed)

    def __hash__(self):
        return hash(self.observed.tobytes())


@dataclass(frozen=True)
class AugmentConfig:
    max_sparsity: float = 0.4
    snr_range_db: tuple = (10.0, 30.0)

    def __post_init__(self):
        if not 0.0 <= self.max_sparsity < 1.0:
            raise InvalidArgumentError("max_sparsity must lie in [0, 1)")
        lo, hi = (float(v) for v in self.snr_range_db)
        if hi < lo or np.isnan(lo) or np.isnan(hi):
            raise InvalidArgumentError("snr_range_db must satisfy lo <= hi")
        if lo != hi and not (np.isfinite(lo) and np.isfinite(hi)):
            raise InvalidArgumentError("an SNR range with distinct ends must be finite")
        object.__setattr__(self, "snr_range_db", (lo, hi))

    def max_missing(self, n):
        # the epsilon guards products like 0.4 * 20 landing just under an integer
        return int(np.floor(self.max_sparsity * n + 1e-9))


def sparsity_level(mask, n):
    """Fraction of removed elements, ``1 - M/N``."""
    if n <= 0:
        raise InvalidArgumentError("n must be positive")
    if mask.n != n:
        raise InvalidArgumentError(f"mask length {mask.n} does not match n={n}")
    return (n - mask.m_count) / n


def random_mask(seed, n, num_missing):
    """Mask with exactly ``num_missing`` absent elements at uniform positions."""
    n, num_missing = int(n), int(num_missing)
    if not 0 <= num_missing < n:
        raise InvalidArgumentError(f"need 0 <= num_missing < n, got {num_missing} of {n}")
    rng = as_generator(seed)
    return SparseMask.from_missing(n, rng.choice(n, size=num_missing, replace=False))


def apply_mask(snapshot, mask):
    """Zero-fill the unobserved entries of ``snapshot``."""
    y = np.asarray(snapshot)
    if y.shape[-1] != mask.n:
        raise InvalidArgumentError(f"snapshot length {y.shape[-1]} does not match mask {mask.n}")
    return np.where(mask.observed, y, 0).astype(np.complex128)


def noise_variance(snapshot, snr_db):
    """Per-element noise variance for ``snr_db`` relative to mean clean power."""
    y = np.asarray(snapshot)
    p_sig = np.mean(np.abs(y) ** 2, axis=-1)
    if np.any(p_sig == 0):
        raise InvalidArgumentError("SNR is undefined for an all-zero signal")
    return p_sig / 10.0 ** (np.asarray(snr_db, dtype=np.float64) / 10.0)


def _complex_gaussian(rng, shape, var):
    z = rng.standard_normal(shape + (2,))
    return np.sqrt(np.asarray(var) / 2.0) * (z[..., 0] + 1j * z[..., 1])


def add_noise(snapshot, snr_db, seed):
    """Add circular complex white Gaussian noise at ``snr_db``.

    ``snr_db = inf`` returns an unchanged copy.
    """
    y = np.asarray(snapshot, dtype=np.complex128)
    if np.isposinf(snr_db):
        return y.copy()
    var = noise_variance(y, snr_db)
    rng = as_generator(seed)
    return y + _complex_gaussian(rng, y.shape, np.broadcast_to(var, y.shape))


def augment_batch(clean_batch, cfg, seed):
    """Randomly mask and corrupt a batch of clean snapshots.

    One missing count and one SNR are shared by the batch; mask positions
    and noise are drawn per snapshot.  Noise is added to observed entries
    only, so missing entries are exactly zero.

    Returns ``(sparse_noisy, observed)`` as ``B x N`` complex and bool arrays.
    """
    Y = np.atleast_2d(np.asarray(clean_batch, dtype=np.complex128))
    B, n = Y.shape
    if B == 0:
        raise InvalidArgumentError("batch must be non-empty")
    rng = as_generator(seed)
    num_missing = int(rng.integers(0, cfg.max_missing(n) + 1))
    lo, hi = cfg.snr_range_db
    snr_db = lo if lo == hi else float(rng.uniform(lo, hi))

    order = np.argsort(rng.random((B, n)), axis=1, kind="stable")
    observed = np.ones((B, n), dtype=bool)
    np.put_along_axis(observed, order[:, :num_missing], False, axis=1)

    if np.isposinf(snr_db):
        noisy = Y.copy()
    else:
        var = noise_variance(Y, snr_db)
        noisy = Y + _complex_gaussian(rng, (B, n), np.repeat(var[:, None], n, axis=1))
    return np.where(observed, noisy, 0.0), observed
