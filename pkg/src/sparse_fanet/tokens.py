"""Frequency grid over the field of view and per-bin token construction.

Token layout for an N-element array (columns, left to right)::

    Re a(theta_p) | Im a(theta_p) | Re y_s | Im y_s | [observed mask] | [sparsity]
         N              N             N        N           N               1

The two bracketed blocks are switched by :class:`TokenConfig`; the default
carries the sparsity scalar and no mask block, giving ``F = 4N + 1``.
"""
from dataclasses import dataclass

import numpy as np

from .array_model import DEFAULT_FOV, manifold
from .errors import InvalidArgumentError
from .sparsify import SparseMask

DEFAULT_P_BINS = 64


@dataclass(frozen=True)
class TokenConfig:
    sparsity_feature: bool = True
    mask_channel: bool = False

    def width(self, n):
        return 4 * n + (n if self.mask_channel else 0) + (1 if self.sparsity_feature else 0)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    fov: tuple
    angles: np.ndarray  # degrees, length P
    grid_manifold: np.ndarray  # N x P complex

    @property
    def p_bins(self):
        return self.angles.shape[0]

    @property
    def n_elements(self):
        return self.grid_manifold.shape[0]


@dataclass(frozen=True, eq=False)
class TokenBatch:
    tokens: np.ndarray  # P x F, or B x P x F for batched input
    observed: np.ndarray  # N bool, or B x N


def build_grid(geometry, fov=DEFAULT_FOV, p_bins=DEFAULT_P_BINS):
    """Uniform grid of ``p_bins`` angles spanning ``fov`` inclusive of both ends."""
    if int(p_bins) < 2:
        raise InvalidArgumentError("p_bins must be >= 2")
    lo, hi = (float(v) for v in fov)
    if not hi > lo:
        raise InvalidArgumentError("fov must be a non-degenerate interval lo < hi")
    angles = np.linspace(lo, hi, int(p_bins))
    A = manifold(geometry, angles)
    angles.setflags(write=False)
    A.setflags(write=False)
    return FrequencyGrid((lo, hi), angles, A)


def tokenize_many(sparse, observed, grid, cfg=TokenConfig(), dtype=np.float64):
    """Batched tokenization: ``B x N`` complex inputs to ``B x P x F`` real tokens."""
    Y = np.atleast_2d(np.asarray(sparse))
    obs = np.atleast_2d(np.asarray(observed, dtype=bool))
    n = grid.n_elements
    if Y.shape[-1] != n or obs.shape != Y.shape:
        raise InvalidArgumentError(
            f"snapshot/mask shape {Y.shape}/{obs.shape} does not match grid with N={n}"
        )
    B, P = Y.shape[0], grid.p_bins
    out = np.empty((B, P, cfg.width(n)), dtype=dtype)
    A = grid.grid_manifold
    out[:, :, :n] = A.real.T
    out[:, :, n:2 * n] = A.imag.T
    out[:, :, 2 * n:3 * n] = Y.real[:, None, :]
    out[:, :, 3 * n:4 * n] = Y.imag[:, None, :]
    col = 4 * n
    if cfg.mask_channel:
        out[:, :, col:col + n] = obs[:, None, :]
        col += n
    if cfg.sparsity_feature:
        out[:, :, col] = (1.0 - obs.sum(axis=1) / n)[:, None]
    return out


def tokenize(sparse_snapshot, mask, grid, cfg=TokenConfig()):
    """Tokens for one zero-filled sparse snapshot; row p belongs to ``grid.angles[p]``."""
    if not isinstance(mask, SparseMask):
        mask = SparseMask(mask)
    y = np.asarray(sparse_snapshot)
    if y.ndim != 1 or y.shape[0] != grid.n_elements or mask.n != grid.n_elements:
        raise InvalidArgumentError(
            f"snapshot length {y.shape} and mask length {mask.n} must equal N={grid.n_elements}"
        )
    tokens = tokenize_many(y[None, :], mask.observed[None, :], grid, cfg)[0]
    return TokenBatch(tokens, mask.observed)
