"""Synthetic corpus, MSE objective, Adam and the training loop."""
import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .array_model import DEFAULT_AMP_RANGE, DEFAULT_FOV, DEFAULT_K_MAX, sample_targets, synthesize_clean
from .errors import InvalidArgumentError, TrainingDivergedError
from .fanet import ModelConfig, NetParams, backward, forward, init_params
from .sparsify import AugmentConfig, augment_batch
from .tokens import TokenConfig, tokenize_many

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    n_signals: int = 8192
    epochs: int = 50
    batch_size: int = 256
    lr: float = 1e-3
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    master_seed: int = 0
    k_max: int = DEFAULT_K_MAX
    amp_range: tuple = DEFAULT_AMP_RANGE
    n_holdout: int = 512
    clip_norm: float = 0.0  # 0 disables clipping

    def __post_init__(self):
        if self.n_signals < 1 or self.batch_size < 1 or self.epochs < 0:
            raise InvalidArgumentError("n_signals and batch_size must be positive, epochs >= 0")
        if not self.lr > 0:
            raise InvalidArgumentError("lr must be positive")
        if self.n_holdout < 0 or self.clip_norm < 0:
            raise InvalidArgumentError("n_holdout and clip_norm must be non-negative")

    @classmethod
    def strict_paper(cls, **overrides):
        base = dict(n_signals=131072, epochs=500, batch_size=512, lr=1e-3,
                    augment=AugmentConfig(0.4, (10.0, 30.0)))
        base.update(overrides)
        return cls(**base)


# ---------------------------------------------------------------- dataset


@dataclass(frozen=True, eq=False)
class Dataset:
    clean: np.ndarray  # n x N complex128
    targets: list

    def __len__(self):
        return self.clean.shape[0]

    def __iter__(self):
        return iter(zip(self.clean, self.targets))


def dataset_record(seed, index, geometry, fov=DEFAULT_FOV, k_max=DEFAULT_K_MAX,
                   amp_range=DEFAULT_AMP_RANGE, tag=seeding.DATASET):
    """Record ``index`` of the corpus keyed by ``seed``; independent of all other records."""
    targets = sample_targets(seeding.stream(seed, tag, index), fov, k_max, amp_range)
    return synthesize_clean(geometry, targets), targets


def iter_dataset(seed, count, geometry, fov=DEFAULT_FOV, k_max=DEFAULT_K_MAX,
                 amp_range=DEFAULT_AMP_RANGE, tag=seeding.DATASET):
    for i in range(count):
        yield dataset_record(seed, i, geometry, fov, k_max, amp_range, tag)


def generate_dataset(cfg, geometry, grid, tag=seeding.DATASET, count=None):
    """Materialize ``cfg.n_signals`` clean snapshots (scenes drawn over ``grid.fov``)."""
    count = cfg.n_signals if count is None else count
    clean = np.empty((count, geometry.n_elements), dtype=np.complex128)
    targets = []
    for i, (y, t) in enumerate(iter_dataset(cfg.master_seed, count, geometry, grid.fov,
                                            cfg.k_max, cfg.amp_range, tag)):
        clean[i] = y
        targets.append(t)
    return Dataset(clean, targets)


# ---------------------------------------------------------------- objective


def mse_loss(recon, clean):
    """Mean over elements (and batch) of ``|y_hat - y|^2``."""
    recon, clean = np.asarray(recon), np.asarray(clean)
    if recon.shape != clean.shape:
        raise InvalidArgumentError(f"shape mismatch {recon.shape} vs {clean.shape}")
    diff = recon.astype(np.complex128) - clean
    return float(np.mean(diff.real ** 2 + diff.imag ** 2))


def mse_grad(recon, clean):
    """Complex gradient ``dL/dRe + i dL/dIm`` of :func:`mse_loss`."""
    recon, clean = np.asarray(recon), np.asarray(clean)
    if recon.shape != clean.shape:
        raise InvalidArgumentError(f"shape mismatch {recon.shape} vs {clean.shape}")
    return (2.0 / recon.size) * (recon - clean.astype(recon.dtype))


def loss_and_grads(tokens, clean, params, grid, model_cfg=ModelConfig()):
    _, y_hat, cache = forward(tokens, params, grid, model_cfg)
    loss = mse_loss(y_hat, clean)
    grads = backward(cache, params, mse_grad(y_hat, clean))
    return loss, grads


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    m: NetParams
    v: NetParams
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(params.map(np.zeros_like), params.map(np.zeros_like), 0)


def adam_step(params, grads, state, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if params.dims != grads.dims or params.dims != state.m.dims:
        raise InvalidArgumentError("params, grads and Adam state shapes disagree")
    b1, b2 = betas
    t = state.t + 1
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = getattr(grads, name)
        m = b1 * getattr(state.m, name) + (1.0 - b1) * g
        v = b2 * getattr(state.v, name) + (1.0 - b2) * (g * g)
        step = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_p[name] = (p - step).astype(p.dtype, copy=False)
        new_m[name] = m.astype(p.dtype, copy=False)
        new_v[name] = v.astype(p.dtype, copy=False)
    return NetParams(**new_p), AdamState(NetParams(**new_m), NetParams(**new_v), t)


def clip_grads(grads, max_norm):
    total = np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.tensors()))
    if max_norm <= 0 or total <= max_norm:
        return grads
    scale = max_norm / total
    return grads.map(lambda g: (g * scale).astype(g.dtype))


# ---------------------------------------------------------------- loop


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    wall_seconds: float
    holdout_loss: float


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)

    @property
    def losses(self):
        return [r.mean_loss for r in self.epochs]

    def to_csv(self, timing=True):
        """CSV text; ``timing=False`` blanks wall_seconds for byte comparisons."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "wall_seconds", "holdout_loss"])
        for r in self.epochs:
            w.writerow([r.epoch, repr(r.mean_loss),
                        f"{r.wall_seconds:.3f}" if timing else "", repr(r.holdout_loss)])
        return buf.getvalue()


def _holdout_batch(cfg, geometry, grid, token_cfg, dtype):
    if cfg.n_holdout == 0:
        return None
    data = generate_dataset(cfg, geometry, grid, tag=seeding.HOLDOUT, count=cfg.n_holdout)
    ys, obs = augment_batch(data.clean, cfg.augment,
                            seeding.stream(cfg.master_seed, seeding.HOLDOUT, cfg.n_holdout))
    return tokenize_many(ys, obs, grid, token_cfg, dtype), data.clean


def evaluate_loss(tokens, clean, params, grid, model_cfg=ModelConfig(), chunk=512):
    total = 0.0
    for i in range(0, tokens.shape[0], chunk):
        _, y_hat, _ = forward(tokens[i:i + chunk], params, grid, model_cfg)
        total += mse_loss(y_hat, clean[i:i + chunk]) * y_hat.shape[0]
    return total / tokens.shape[0]


def train(cfg, geometry, grid, model_cfg=ModelConfig(), token_cfg=TokenConfig(),
          dtype=np.float32, dataset=None, callback=None):
    """Train from scratch; returns ``(params, TrainingLog)``.

    Every draw is keyed by ``cfg.master_seed`` plus (epoch, batch) counters,
    so the result is a pure function of the arguments.
    """
    seed = cfg.master_seed
    F = token_cfg.width(geometry.n_elements)
    dims = (F, model_cfg.d_embed, model_cfg.d_attn, model_cfg.d_ff)
    params = init_params(seeding.stream(seed, seeding.INIT), dims, dtype=dtype)
    history = TrainingLog()
    if cfg.epochs == 0:
        return params, history

    data = dataset if dataset is not None else generate_dataset(cfg, geometry, grid)
    holdout = _holdout_batch(cfg, geometry, grid, token_cfg, dtype)
    state = AdamState.zeros_like(params)
    n = len(data)
    n_batches = -(-n // cfg.batch_size)
    t0 = time.perf_counter()

    for epoch in range(cfg.epochs):
        perm = seeding.stream(seed, seeding.SHUFFLE, epoch).permutation(n)
        weighted = 0.0
        for b in range(n_batches):
            idx = perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            clean = data.clean[idx]
            ys, obs = augment_batch(clean, cfg.augment,
                                    seeding.stream(seed, seeding.AUGMENT, epoch, b))
            X = tokenize_many(ys, obs, grid, token_cfg, dtype)
            loss, grads = loss_and_grads(X, clean, params, grid, model_cfg)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch + 1, b, loss, history.losses)
            if cfg.clip_norm > 0:
                grads = clip_grads(grads, cfg.clip_norm)
            params, state = adam_step(params, grads, state, cfg.lr, cfg.adam_betas, cfg.adam_eps)
            weighted += loss * idx.size

        hold = float("nan")
        if holdout is not None:
            hold = evaluate_loss(holdout[0], holdout[1], params, grid, model_cfg)
        rec = EpochRecord(epoch + 1, weighted / n, time.perf_counter() - t0, hold)
        history.epochs.append(rec)
        log.info("epoch %d loss %.6g holdout %.6g (%.1fs)", rec.epoch, rec.mean_loss,
                 rec.holdout_loss, rec.wall_seconds)
        if callback is not None:
            callback(rec)
    return params, history
