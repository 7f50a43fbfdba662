import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_fanet.array_model import ArrayGeometry
from sparse_fanet.containers import deserialize_checkpoint, deserialize_params, serialize_params
from sparse_fanet.errors import FormatError, InvalidArgumentError, InvalidStateError
from sparse_fanet.fanet import (
    ModelConfig, NetParams, attention, attention_scores, backward, forward, init_params,
    param_count,
)
from sparse_fanet.sparsify import random_mask
from sparse_fanet.tokens import TokenConfig, build_grid, tokenize_many


def test_init_deterministic_and_bounded():
    a = init_params(5, (81, 128, 64, 256))
    b = init_params(5, (81, 128, 64, 256))
    for (name, x), y in zip(a.items(), b.tensors()):
        assert x.tobytes() == y.tobytes()
        if name.startswith("b"):
            assert np.all(x == 0)
        else:
            assert np.abs(x).max() <= 1 / np.sqrt(x.shape[0])


def test_param_count_formula():
    expected = (81 * 128 + 128 + 3 * (128 * 64 + 64) + 64 * 256 + 256 + 256 * 64 + 64
                + 64 * 2 + 2)
    assert param_count((81, 128, 64, 256)) == expected
    assert init_params(0, (81, 128, 64, 256)).n_params() == expected


def test_init_rejects_zero_dim():
    with pytest.raises(InvalidArgumentError):
        init_params(0, (81, 0, 64, 256))


def test_attention_uniform_for_identical_rows(rng):
    Q = np.tile(rng.standard_normal(4), (6, 1))
    V = rng.standard_normal((6, 4))
    out = attention(Q, Q, V)
    np.testing.assert_allclose(attention_scores(Q, Q), 1 / 6, atol=1e-15)
    np.testing.assert_allclose(out, np.tile(V.mean(axis=0), (6, 1)), atol=1e-12)


def test_attention_selects_aligned_key():
    q = np.array([[10.0, 0.0, 0.0]])
    K = np.array([[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]])
    V = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
    # hand softmax: logits (100/sqrt3, 0, 0)
    z = 100 / np.sqrt(3)
    w = np.array([1.0, np.exp(-z), np.exp(-z)]) / (1 + 2 * np.exp(-z))
    out = attention(np.vstack([q, q, q]), K, V)
    np.testing.assert_allclose(out[0], w @ V, rtol=1e-12)
    np.testing.assert_allclose(out[0], V[0], atol=1e-20 + 1e-12)


def test_attention_zero_values(rng):
    Q, K = rng.standard_normal((2, 5, 3))
    np.testing.assert_array_equal(attention(Q, K, np.zeros((5, 3))), 0.0)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 30.0))
def test_attention_rows_sum_to_one(seed, scale):
    rng = np.random.default_rng(seed)
    Q, K = scale * rng.standard_normal((2, 16, 8))
    S = attention_scores(Q, K)
    np.testing.assert_allclose(S.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(S >= 0)


@pytest.fixture(scope="module")
def small():
    geom = ArrayGeometry.ula(6)
    grid = build_grid(geom, (-30, 30), 7)
    rng = np.random.default_rng(3)
    Y = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    obs = np.stack([random_mask(rng, 6, 2).observed for _ in range(4)])
    X = tokenize_many(np.where(obs, Y, 0), obs, grid)
    dims = (TokenConfig().width(6), 8, 4, 8)
    return grid, X, dims


def test_forward_shapes(grid20):
    X = tokenize_many(np.ones((2, 20)), np.ones((2, 20), bool), grid20)
    s, y, _ = forward(X, init_params(0, (81, 128, 64, 256)), grid20)
    assert s.shape == (2, 64) and y.shape == (2, 20)
    s1, y1, _ = forward(X[0], init_params(0, (81, 128, 64, 256)), grid20)
    assert s1.shape == (64,) and y1.shape == (20,)


def test_zero_weights_give_bias_constant(small):
    grid, X, dims = small
    p = NetParams.zeros(dims)
    p.b_out[:] = [0.3, -0.2]
    s, y, _ = forward(X, p, grid)
    np.testing.assert_allclose(s, 0.3 - 0.2j)
    np.testing.assert_allclose(y, (grid.grid_manifold @ np.full(7, 0.3 - 0.2j))[None].repeat(4, 0))


@pytest.mark.parametrize("cfg", [ModelConfig(), ModelConfig(residual=False),
                                 ModelConfig(layer_norm=True)])
def test_synthesis_is_manifold_times_spectrum(small, cfg):
    grid, X, dims = small
    p = init_params(1, dims, dtype=np.float64)
    s, y, _ = forward(X, p, grid, cfg)
    np.testing.assert_allclose(y, s @ grid.grid_manifold.T, atol=1e-13)


def test_forward_is_permutation_equivariant(small):
    grid, X, dims = small
    p = init_params(2, dims, dtype=np.float64)
    perm = np.random.default_rng(0).permutation(grid.p_bins)
    s, _, _ = forward(X, p, grid)
    s_perm, _, _ = forward(X[:, perm], p, grid)
    np.testing.assert_allclose(s_perm, s[:, perm], atol=1e-12)


def test_forward_deterministic(small):
    grid, X, dims = small
    p = init_params(2, dims)
    a, b = forward(X, p, grid), forward(X, p, grid)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


def test_forward_rejects_width_mismatch(small):
    grid, X, dims = small
    with pytest.raises(InvalidArgumentError):
        forward(X[..., :-1], init_params(0, dims), grid)


def test_backward_rejects_stale_cache(small):
    grid, X, dims = small
    p = init_params(0, dims)
    _, y, cache = forward(X, p, grid)
    with pytest.raises(InvalidStateError):
        backward(cache, init_params(0, dims), np.zeros_like(y))
    backward(cache, p, np.zeros_like(y))
    with pytest.raises(InvalidStateError):
        backward(cache, p, np.zeros_like(y))


def test_serialize_round_trip_bit_exact():
    p = init_params(9, (17, 8, 4, 8))
    p = p.map(lambda a: a + np.float32(0.125))
    q = deserialize_params(serialize_params(p))
    for a, b in zip(p.tensors(), q.tensors()):
        assert a.dtype == b.dtype == np.float32 and a.tobytes() == b.tobytes()


def test_serialize_keeps_flags_and_seed():
    p = init_params(0, (17, 8, 4, 8))
    blob = serialize_params(p, ModelConfig(8, 4, 8, residual=False, layer_norm=True),
                            TokenConfig(sparsity_feature=False, mask_channel=True), seed=42)
    ck = deserialize_checkpoint(blob)
    assert ck.seed == 42
    assert ck.model_cfg == ModelConfig(8, 4, 8, residual=False, layer_norm=True)
    assert ck.token_cfg == TokenConfig(sparsity_feature=False, mask_channel=True)


def test_deserialize_truncated_names_tensor():
    blob = serialize_params(init_params(0, (17, 8, 4, 8)))
    with pytest.raises(FormatError) as exc:
        deserialize_params(blob[:-4])
    assert exc.value.field == "b_out"
    with pytest.raises(FormatError) as exc:
        deserialize_params(blob[:44 + 4 * 17 * 8 + 8])
    assert exc.value.field == "b_embed"


def test_deserialize_header_errors():
    blob = bytearray(serialize_params(init_params(0, (17, 8, 4, 8))))
    bad = bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError) as exc:
        deserialize_params(bad)
    assert exc.value.field == "magic"
    ver = bytearray(blob)
    ver[4] = 9
    with pytest.raises(FormatError) as exc:
        deserialize_params(bytes(ver))
    assert exc.value.field == "version"
    dims = bytearray(blob)
    dims[8] = 18  # F = 18 disagrees with the stored value count
    with pytest.raises(FormatError) as exc:
        deserialize_params(bytes(dims))
    assert exc.value.field == "dims"
    with pytest.raises(FormatError) as exc:
        deserialize_params(bytes(blob) + b"\0\0\0\0")
    assert exc.value.field == "payload"
