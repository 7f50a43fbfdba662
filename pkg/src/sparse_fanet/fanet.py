"""Frequency attention network: forward pass, manual reverse pass, weights.

Per token (one per grid bin)::

    e   = x W_embed + b_embed                [optional parameter-free layer norm]
    q, k, v = e W_q + b_q, e W_k + b_k, e W_v + b_v
    h1  = softmax(q k^T / sqrt(d)) v  (+ v)
    h2  = relu(h1 W_ff1 + b_ff1) W_ff2 + b_ff2  (+ h1)
    o   = h2 W_out + b_out                   -> s_p = o[0] + i o[1]

and the reconstruction is ``y_hat = A_grid @ s``.  The ``(+ ...)`` terms are
the residual connections toggled by ``ModelConfig.residual``.  The attention
residual adds the value projection because the embedding width D and the
attention width d differ.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError
from .seeding import as_generator

TENSOR_ORDER = (
    "W_embed", "b_embed",
    "W_q", "b_q",
    "W_k", "b_k",
    "W_v", "b_v",
    "W_ff1", "b_ff1",
    "W_ff2", "b_ff2",
    "W_out", "b_out",
)

LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    d_embed: int = 128  # D
    d_attn: int = 64  # d
    d_ff: int = 256  # H
    residual: bool = True
    layer_norm: bool = False


def tensor_shapes(dims):
    F, D, d, H = dims
    return {
        "W_embed": (F, D), "b_embed": (D,),
        "W_q": (D, d), "b_q": (d,),
        "W_k": (D, d), "b_k": (d,),
        "W_v": (D, d), "b_v": (d,),
        "W_ff1": (d, H), "b_ff1": (H,),
        "W_ff2": (H, d), "b_ff2": (d,),
        "W_out": (d, 2), "b_out": (2,),
    }


def _check_dims(dims):
    dims = tuple(int(v) for v in dims)
    if len(dims) != 4 or min(dims) <= 0:
        raise InvalidArgumentError(f"dims (F, D, d, H) must be four positive ints, got {dims}")
    return dims


@dataclass
class NetParams:
    W_embed: np.ndarray
    b_embed: np.ndarray
    W_q: np.ndarray
    b_q: np.ndarray
    W_k: np.ndarray
    b_k: np.ndarray
    W_v: np.ndarray
    b_v: np.ndarray
    W_ff1: np.ndarray
    b_ff1: np.ndarray
    W_ff2: np.ndarray
    b_ff2: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        dims = self.dims
        for name, shape in tensor_shapes(dims).items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise InvalidArgumentError(f"{name} has shape {arr.shape}, expected {shape}")

    @property
    def dims(self):
        F, D = self.W_embed.shape
        return F, D, self.W_q.shape[1], self.W_ff1.shape[1]

    @property
    def dtype(self):
        return self.W_embed.dtype

    def tensors(self):
        return [getattr(self, name) for name in TENSOR_ORDER]

    def items(self):
        return [(name, getattr(self, name)) for name in TENSOR_ORDER]

    def map(self, fn):
        return NetParams(**{name: fn(arr) for name, arr in self.items()})

    def n_params(self):
        return sum(arr.size for arr in self.tensors())

    def astype(self, dtype):
        return self.map(lambda a: a.astype(dtype))

    @classmethod
    def zeros(cls, dims, dtype=np.float64):
        dims = _check_dims(dims)
        return cls(**{n: np.zeros(s, dtype=dtype) for n, s in tensor_shapes(dims).items()})


def param_count(dims):
    return sum(int(np.prod(s)) for s in tensor_shapes(_check_dims(dims)).values())


def init_params(seed, dims, dtype=np.float32):
    """Weights uniform on ``+-1/sqrt(fan_in)``, biases zero."""
    dims = _check_dims(dims)
    rng = as_generator(seed)
    out = {}
    for name, shape in tensor_shapes(dims).items():
        if name.startswith("W"):
            bound = 1.0 / np.sqrt(shape[0])
            out[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
        else:
            out[name] = np.zeros(shape, dtype=dtype)
    return NetParams(**out)


# ---------------------------------------------------------------- attention


def softmax_rows(S):
    Z = S - S.max(axis=-1, keepdims=True)
    np.exp(Z, out=Z)
    Z /= Z.sum(axis=-1, keepdims=True)
    return Z


def attention_scores(Q, K):
    return softmax_rows(Q @ np.swapaxes(K, -1, -2) / np.sqrt(Q.shape[-1]))


def attention(Q, K, V):
    """Scaled dot-product attention ``softmax(Q K^T / sqrt(d)) V`` over the last two axes."""
    Q, K, V = np.asarray(Q), np.asarray(K), np.asarray(V)
    if Q.shape != K.shape or K.shape[:-1] != V.shape[:-1]:
        raise InvalidArgumentError(f"inconsistent attention shapes {Q.shape}, {K.shape}, {V.shape}")
    return attention_scores(Q, K) @ V


# ---------------------------------------------------------------- forward


@dataclass
class Cache:
    params: NetParams
    cfg: ModelConfig
    X: np.ndarray
    E: np.ndarray
    ln_inv_std: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    scores: np.ndarray
    H1: np.ndarray
    Z: np.ndarray
    R: np.ndarray
    H2: np.ndarray
    manifold: np.ndarray
    batched: bool
    consumed: bool = field(default=False)


def _grid_manifold(grid, dtype):
    A = grid.grid_manifold
    return A.astype(np.complex64) if dtype == np.float32 else A.astype(np.complex128)


def forward(tokens, params, grid, cfg=ModelConfig()):
    """Run the network on ``P x F`` or ``B x P x F`` tokens.

    ``tokens`` may be a :class:`~sparse_fanet.tokens.TokenBatch` or an array.
    Returns ``(s_hat, y_hat, cache)`` with ``s_hat`` of shape ``(..., P)`` and
    ``y_hat`` of shape ``(..., N)``.
    """
    X = getattr(tokens, "tokens", tokens)
    X = np.asarray(X)
    batched = X.ndim == 3
    if not batched:
        X = X[None]
    if X.ndim != 3:
        raise InvalidArgumentError(f"tokens must be P x F or B x P x F, got {X.shape}")
    F = params.dims[0]
    if X.shape[-1] != F:
        raise InvalidArgumentError(f"token width {X.shape[-1]} does not match params F={F}")
    if X.shape[1] != grid.p_bins:
        raise InvalidArgumentError(f"{X.shape[1]} tokens for a grid of {grid.p_bins} bins")
    p = params
    X = X.astype(p.dtype, copy=False)

    E = X @ p.W_embed + p.b_embed
    ln_inv_std = None
    if cfg.layer_norm:
        mu = E.mean(axis=-1, keepdims=True)
        ln_inv_std = 1.0 / np.sqrt(E.var(axis=-1, keepdims=True) + LN_EPS)
        E = (E - mu) * ln_inv_std
    Q = E @ p.W_q + p.b_q
    K = E @ p.W_k + p.b_k
    V = E @ p.W_v + p.b_v
    scores = attention_scores(Q, K)
    H1 = scores @ V
    if cfg.residual:
        H1 = H1 + V
    Z = H1 @ p.W_ff1 + p.b_ff1
    R = np.maximum(Z, 0)
    H2 = R @ p.W_ff2 + p.b_ff2
    if cfg.residual:
        H2 = H2 + H1
    O = H2 @ p.W_out + p.b_out
    s_hat = O[..., 0] + 1j * O[..., 1]
    A = _grid_manifold(grid, p.dtype)
    y_hat = s_hat @ A.T

    cache = Cache(p, cfg, X, E, ln_inv_std, Q, K, V, scores, H1, Z, R, H2, A, batched)
    if not batched:
        return s_hat[0], y_hat[0], cache
    return s_hat, y_hat, cache


def _sum_outer(a, b):
    """Sum over all leading axes of ``a[..., i] * b[..., j]``."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def backward(cache, params, grad_recon):
    """Reverse pass through :func:`forward`.

    ``grad_recon`` is the complex upstream gradient ``dL/dRe(y_hat) +
    i dL/dIm(y_hat)`` with the shape of ``y_hat``.  Returns a
    :class:`NetParams` of parameter gradients.
    """
    if cache.params is not params:
        raise InvalidStateError("cache was produced by a different NetParams object")
    if cache.consumed:
        raise InvalidStateError("cache has already been consumed by backward")
    cache.consumed = True
    p, c = params, cache
    G = np.asarray(grad_recon)
    if not c.batched:
        G = G[None]
    if G.shape != (c.X.shape[0], c.manifold.shape[0]):
        raise InvalidArgumentError(f"grad_recon shape {G.shape} does not match the forward batch")

    AhG = G.astype(c.manifold.dtype) @ c.manifold.conj()
    dO = np.stack([AhG.real, AhG.imag], axis=-1).astype(p.dtype)

    g = {}
    g["W_out"] = _sum_outer(c.H2, dO)
    g["b_out"] = dO.sum(axis=(0, 1))
    dH2 = dO @ p.W_out.T

    g["W_ff2"] = _sum_outer(c.R, dH2)
    g["b_ff2"] = dH2.sum(axis=(0, 1))
    dZ = (dH2 @ p.W_ff2.T) * (c.Z > 0)
    g["W_ff1"] = _sum_outer(c.H1, dZ)
    g["b_ff1"] = dZ.sum(axis=(0, 1))
    dH1 = dZ @ p.W_ff1.T
    if c.cfg.residual:
        dH1 = dH1 + dH2

    dV = np.swapaxes(c.scores, -1, -2) @ dH1
    if c.cfg.residual:
        dV = dV + dH1
    dAw = dH1 @ np.swapaxes(c.V, -1, -2)
    dS = c.scores * (dAw - (dAw * c.scores).sum(axis=-1, keepdims=True))
    scale = 1.0 / np.sqrt(c.Q.shape[-1])
    dQ = (dS @ c.K) * scale
    dK = (np.swapaxes(dS, -1, -2) @ c.Q) * scale

    g["W_q"] = _sum_outer(c.E, dQ)
    g["b_q"] = dQ.sum(axis=(0, 1))
    g["W_k"] = _sum_outer(c.E, dK)
    g["b_k"] = dK.sum(axis=(0, 1))
    g["W_v"] = _sum_outer(c.E, dV)
    g["b_v"] = dV.sum(axis=(0, 1))
    dE = dQ @ p.W_q.T + dK @ p.W_k.T + dV @ p.W_v.T
    if c.cfg.layer_norm:
        # c.E holds the normalized activations
        dE = c.ln_inv_std * (
            dE - dE.mean(axis=-1, keepdims=True)
            - c.E * (dE * c.E).mean(axis=-1, keepdims=True)
        )

    g["W_embed"] = _sum_outer(c.X, dE)
    g["b_embed"] = dE.sum(axis=(0, 1))
    return NetParams(**{k: v.astype(p.dtype, copy=False) for k, v in g.items()})


def predict(tokens, params, grid, cfg=ModelConfig(), chunk=1024):
    """Reconstruct a batch in chunks without keeping caches; returns ``y_hat``."""
    X = np.asarray(getattr(tokens, "tokens", tokens))
    if X.ndim == 2:
        return forward(X, params, grid, cfg)[1]
    out = [forward(X[i:i + chunk], params, grid, cfg)[1] for i in range(0, X.shape[0], chunk)]
    return np.concatenate(out, axis=0)

