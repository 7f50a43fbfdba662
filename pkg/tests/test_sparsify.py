import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparse_fanet.errors import InvalidArgumentError
from sparse_fanet.sparsify import (
    AugmentConfig, SparseMask, add_noise, apply_mask, augment_batch, random_mask,
    sparsity_level,
)


def test_sparsity_level_examples():
    assert sparsity_level(SparseMask.from_missing(20, range(8)), 20) == pytest.approx(0.4)
    assert sparsity_level(SparseMask(np.ones(20, bool)), 20) == 0.0
    assert sparsity_level(SparseMask([True, False]), 2) == 0.5


def test_sparsity_level_rejects_zero_and_mismatch():
    with pytest.raises(InvalidArgumentError):
        sparsity_level(SparseMask([True]), 0)
    with pytest.raises(InvalidArgumentError):
        sparsity_level(SparseMask([True, True]), 3)


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1))),
       st.integers(0, 2**32 - 1))
def test_random_mask_count_and_sparsity(nm, seed):
    n, m = nm
    mask = random_mask(seed, n, m)
    assert mask.n == n and mask.m_count == n - m
    assert sparsity_level(mask, n) == m / n


def test_random_mask_no_missing_and_determinism():
    assert random_mask(1, 20, 0).observed.all()
    assert random_mask(99, 20, 8) == random_mask(99, 20, 8)


def test_random_mask_rejects_too_many_missing():
    with pytest.raises(InvalidArgumentError):
        random_mask(0, 20, 20)


def test_random_mask_positions_uniform():
    rng = np.random.default_rng(7)
    counts = np.zeros(20)
    draws = 100_000
    for _ in range(draws):
        counts += ~random_mask(rng, 20, 8).observed
    np.testing.assert_allclose(counts / draws, 8 / 20, atol=0.01)


def test_apply_mask_examples():
    y = np.ones(20, complex)
    full = SparseMask(np.ones(20, bool))
    np.testing.assert_array_equal(apply_mask(y, full), y)
    mask = random_mask(3, 20, 8)
    out = apply_mask(y, mask)
    assert (out == 1).sum() == 12 and (out == 0).sum() == 8
    np.testing.assert_array_equal(apply_mask(out, mask), out)


@given(st.integers(0, 2**32 - 1))
def test_apply_mask_keeps_observed_entries_exactly(seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    mask = random_mask(rng, 20, int(rng.integers(0, 20)))
    out = apply_mask(y, mask)
    np.testing.assert_array_equal(out[mask.observed], y[mask.observed])
    assert np.all(out[~mask.observed] == 0)


def test_apply_mask_length_mismatch():
    with pytest.raises(InvalidArgumentError):
        apply_mask(np.ones(5), SparseMask(np.ones(4, bool)))


def test_add_noise_noiseless_sentinel_is_identity():
    y = np.arange(5) + 1j
    np.testing.assert_array_equal(add_noise(y, np.inf, 0), y)


def test_add_noise_rejects_zero_signal():
    with pytest.raises(InvalidArgumentError):
        add_noise(np.zeros(4), 10.0, 0)


def test_add_noise_power_matches_snr():
    y = np.ones(20, complex)
    rng = np.random.default_rng(11)
    diffs = np.stack([add_noise(y, 10.0, rng) - y for _ in range(100_000)])
    power_db = 10 * np.log10(np.mean(np.abs(diffs) ** 2))
    assert abs(power_db - (-10.0)) < 0.2
    # 5-sigma bounds on the sample mean and variance of the real part
    n = diffs.size
    var = 0.1
    assert abs(diffs.real.mean()) < 5 * np.sqrt(var / 2 / n)
    assert abs(np.var(diffs.real) - var / 2) < 5 * (var / 2) * np.sqrt(2 / n)


def test_add_noise_deterministic():
    y = np.ones(8) + 0.5j
    np.testing.assert_array_equal(add_noise(y, 12.0, 5), add_noise(y, 12.0, 5))


def _clean_batch(b=64, n=20, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((b, n)) + 1j * rng.standard_normal((b, n))


def test_augment_disabled_is_identity():
    Y = _clean_batch()
    out, obs = augment_batch(Y, AugmentConfig(0.0, (np.inf, np.inf)), 3)
    np.testing.assert_array_equal(out, Y)
    assert obs.all()


def test_augment_missing_count_is_shared_and_bounded():
    Y = _clean_batch()
    cfg = AugmentConfig(0.4, (10, 30))
    seen = set()
    for seed in range(200):
        out, obs = augment_batch(Y, cfg, seed)
        missing = (~obs).sum(axis=1)
        assert np.all(missing == missing[0])
        seen.add(int(missing[0]))
        assert np.all(out[~obs] == 0)
    assert seen == set(range(9))


def test_augment_masks_independent_per_snapshot():
    out, obs = augment_batch(_clean_batch(256), AugmentConfig(0.4, (10, 30)), 4)
    if (~obs).sum() == 0:
        out, obs = augment_batch(_clean_batch(256), AugmentConfig(0.4, (10, 30)), 5)
    assert len({row.tobytes() for row in obs}) > 1


def test_augment_bit_identical_under_seed():
    Y = _clean_batch()
    a = augment_batch(Y, AugmentConfig(), 77)
    b = augment_batch(Y, AugmentConfig(), 77)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


def test_augment_noise_only_on_observed():
    Y = _clean_batch()
    out, obs = augment_batch(Y, AugmentConfig(0.4, (10, 10)), 8)
    assert np.all(out[obs] != Y[obs])
    assert np.all(out[~obs] == 0)


@pytest.mark.parametrize("kw", [dict(max_sparsity=1.0), dict(max_sparsity=-0.1),
                                dict(snr_range_db=(30, 10)), dict(snr_range_db=(10, np.inf))])
def test_augment_config_validation(kw):
    with pytest.raises(InvalidArgumentError):
        AugmentConfig(**kw)


def test_max_missing_at_default_sparsity():
    assert AugmentConfig(0.4).max_missing(20) == 8
