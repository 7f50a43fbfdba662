"""Single-snapshot interpolation by iterative hard thresholding on a Hankel lift.

A clean K-target ULA snapshot is a sum of K complex exponentials, so its
L x (N-L+1) Hankel lift has rank K.  Each iteration takes a gradient step on
the observed residual, projects the lift onto rank ``r`` with a truncated SVD
and maps back by anti-diagonal averaging.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError
from .sparsify import SparseMask


@dataclass(frozen=True)
class IhtConfig:
    rank: int = 2
    pencil: int = 10
    max_iters: int = 200
    tol: float = 1e-6
    step: float = 1.0
    reclamp: bool = False

    def validate(self, n):
        L, r = self.pencil, self.rank
        if not 2 <= L <= n - 1:
            raise InvalidArgumentError(f"pencil L={L} must lie in [2, {n - 1}]")
        if not 1 <= r <= min(L, n - L + 1):
            raise InvalidArgumentError(f"rank {r} must lie in [1, {min(L, n - L + 1)}]")
        if not self.tol > 0 or not 0 < self.step <= 1 or self.max_iters < 1:
            raise InvalidArgumentError("need tol > 0, 0 < step <= 1 and max_iters >= 1")
        return self

    @classmethod
    def for_array(cls, n, **kw):
        """Default config with the maximally square pencil ``ceil(N/2)``."""
        return cls(pencil=-(-n // 2), **kw)


@dataclass(frozen=True, eq=False)
class IhtResult:
    snapshot: np.ndarray
    n_iter: int
    converged: bool


def hankel(signal, L):
    """``H[i, j] = signal[i + j]`` with shape ``L x (N - L + 1)``."""
    x = np.asarray(signal)
    if x.ndim != 1:
        raise InvalidArgumentError("signal must be 1-D")
    n = x.shape[0]
    if not 2 <= L <= n - 1:
        raise InvalidArgumentError(f"pencil L={L} must lie in [2, {n - 1}]")
    return _kernels.hankel(x, int(L))


def dehankel(H, n):
    """Average each anti-diagonal of ``H`` back into a length-``n`` vector."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] + H.shape[1] - 1 != n:
        raise InvalidArgumentError(f"lift of shape {H.shape} cannot come from length {n}")
    return _kernels.dehankel(H)


def hard_threshold(H, r):
    """Best rank-``r`` approximation (Frobenius and spectral norm) via truncated SVD."""
    H = np.asarray(H)
    if H.ndim != 2 or not 1 <= r <= min(H.shape):
        raise InvalidArgumentError(f"rank {r} must lie in [1, {min(H.shape)}]")
    return _kernels.truncate_rank(H, int(r))


def _observed(mask, n):
    obs = mask.observed if isinstance(mask, SparseMask) else np.asarray(mask, dtype=bool)
    if obs.shape[-1] != n:
        raise InvalidArgumentError(f"mask length {obs.shape[-1]} does not match signal length {n}")
    return obs


def iht_interpolate(sparse, mask, cfg=IhtConfig()):
    """Reconstruct a full snapshot from its zero-filled observation.

    Non-convergence is reported through ``IhtResult.converged``; the
    returned snapshot is then the iterate with the smallest observed residual.
    """
    y = np.asarray(sparse, dtype=np.complex128)
    if y.ndim != 1:
        raise InvalidArgumentError("sparse snapshot must be 1-D; use iht_interpolate_many")
    X, iters, conv = iht_interpolate_many(y[None], _observed(mask, y.shape[0])[None], cfg)
    return IhtResult(X[0], int(iters[0]), bool(conv[0]))


def iht_interpolate_many(sparse, observed, cfg=IhtConfig()):
    """Batched :func:`iht_interpolate`; returns ``(X, n_iter, converged)`` arrays."""
    Y = np.atleast_2d(np.asarray(sparse, dtype=np.complex128))
    obs = np.atleast_2d(_observed(observed, Y.shape[-1]))
    if obs.shape != Y.shape:
        raise InvalidArgumentError(f"mask shape {obs.shape} does not match {Y.shape}")
    cfg.validate(Y.shape[1])
    if np.any(obs.sum(axis=1) < cfg.rank):
        raise InvalidArgumentError(f"need at least rank={cfg.rank} observed entries")
    Y = np.where(obs, Y, 0)
    return _kernels.iht_batch(Y, obs, cfg.pencil, cfg.rank, cfg.step, cfg.max_iters,
                              cfg.tol, cfg.reclamp)
