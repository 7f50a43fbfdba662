"""Flat ``section.key = value`` run configuration.

One assignment per line; ``#`` starts a comment; lists are comma separated;
booleans are ``true``/``false``; ``inf`` is accepted for floats.  Unknown keys
are rejected so typos cannot silently fall back to defaults.
"""
from dataclasses import dataclass

import numpy as np

from .array_model import ArrayGeometry
from .evaluation import SweepConfig
from .fanet import ModelConfig
from .iht import IhtConfig
from .sparsify import AugmentConfig
from .tokens import TokenConfig, build_grid
from .training import TrainConfig


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _floats(count):
    def parse(text):
        vals = tuple(float(v) for v in text.split(",") if v.strip())
        if count is not None and len(vals) != count:
            raise ValueError(f"expected {count} comma-separated numbers")
        if not vals:
            raise ValueError("expected at least one number")
        return vals
    return parse


_INT, _FLOAT, _BOOL, _STR = int, float, _bool, str

# key -> (parser, default)
SCHEMA = {
    "seed": (_INT, 0),
    "out": (_STR, "out"),
    "geometry.n_elements": (_INT, 20),
    "geometry.spacing": (_FLOAT, 0.5),
    "grid.fov": (_floats(2), (-30.0, 30.0)),
    "grid.p_bins": (_INT, 64),
    "model.d_embed": (_INT, 128),
    "model.d_attn": (_INT, 64),
    "model.d_ff": (_INT, 256),
    "model.residual": (_BOOL, True),
    "model.layer_norm": (_BOOL, False),
    "tokens.sparsity_feature": (_BOOL, True),
    "tokens.mask_channel": (_BOOL, False),
    "train.n_signals": (_INT, 8192),
    "train.epochs": (_INT, 50),
    "train.batch_size": (_INT, 256),
    "train.lr": (_FLOAT, 1e-3),
    "train.betas": (_floats(2), (0.9, 0.999)),
    "train.eps": (_FLOAT, 1e-8),
    "train.max_sparsity": (_FLOAT, 0.4),
    "train.snr_db": (_floats(2), (10.0, 30.0)),
    "train.k_max": (_INT, 2),
    "train.amp_range": (_floats(2), (0.5, 1.0)),
    "train.n_holdout": (_INT, 512),
    "train.clip_norm": (_FLOAT, 0.0),
    "iht.rank": (_INT, 2),
    "iht.pencil": (_INT, 0),  # 0 selects ceil(N/2)
    "iht.max_iters": (_INT, 200),
    "iht.tol": (_FLOAT, 1e-6),
    "iht.step": (_FLOAT, 1.0),
    "iht.reclamp": (_BOOL, False),
    "sweep.snr_db": (_floats(None), (10.0, 15.0, 20.0, 25.0, 30.0)),
    "sweep.n_trials": (_INT, 500),
    "sweep.n_missing": (_INT, 8),
    "sweep.n_targets": (_INT, 2),
}

STRICT_PAPER = {
    "train.n_signals": 131072,
    "train.epochs": 500,
    "train.batch_size": 512,
    "train.lr": 1e-3,
    "train.max_sparsity": 0.4,
    "train.snr_db": (10.0, 30.0),
    "train.amp_range": (0.5, 1.0),
    "train.k_max": 2,
    "geometry.n_elements": 20,
    "geometry.spacing": 0.5,
    "grid.fov": (-30.0, 30.0),
    "grid.p_bins": 64,
    "sweep.n_trials": 5000,
    "sweep.n_missing": 8,
    "sweep.n_targets": 2,
}


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    values: dict

    @classmethod
    def defaults(cls, strict_paper=False):
        vals = {k: d for k, (_, d) in SCHEMA.items()}
        if strict_paper:
            vals.update(STRICT_PAPER)
        return cls(vals)

    @classmethod
    def parse(cls, text, strict_paper=False):
        cfg = cls.defaults(strict_paper)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(None, f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            cfg.set(key, value)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, strict_paper=False):
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), strict_paper)

    def set(self, key, text):
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        parser = SCHEMA[key][0]
        try:
            self.values[key] = parser(text) if isinstance(text, str) else text
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None

    def dump(self):
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in SCHEMA)

    def __getitem__(self, key):
        return self.values[key]

    # -- typed views -------------------------------------------------------

    def geometry(self):
        return ArrayGeometry.ula(self["geometry.n_elements"], self["geometry.spacing"])

    def grid(self, geometry=None):
        return build_grid(geometry or self.geometry(), self["grid.fov"], self["grid.p_bins"])

    def model(self):
        return ModelConfig(self["model.d_embed"], self["model.d_attn"], self["model.d_ff"],
                           self["model.residual"], self["model.layer_norm"])

    def tokens(self):
        return TokenConfig(self["tokens.sparsity_feature"], self["tokens.mask_channel"])

    def train(self):
        return TrainConfig(
            n_signals=self["train.n_signals"], epochs=self["train.epochs"],
            batch_size=self["train.batch_size"], lr=self["train.lr"],
            adam_betas=self["train.betas"], adam_eps=self["train.eps"],
            augment=AugmentConfig(self["train.max_sparsity"], self["train.snr_db"]),
            master_seed=self["seed"], k_max=self["train.k_max"],
            amp_range=self["train.amp_range"], n_holdout=self["train.n_holdout"],
            clip_norm=self["train.clip_norm"],
        )

    def iht(self):
        n = self["geometry.n_elements"]
        pencil = self["iht.pencil"] or -(-n // 2)
        return IhtConfig(self["iht.rank"], pencil, self["iht.max_iters"], self["iht.tol"],
                         self["iht.step"], self["iht.reclamp"])

    def sweep(self):
        return SweepConfig(self["sweep.snr_db"], self["sweep.n_trials"], self["sweep.n_missing"],
                           self["sweep.n_targets"], self["seed"], self["grid.fov"],
                           self["train.amp_range"])

    def _check_model(self):
        if min(self["model.d_embed"], self["model.d_attn"], self["model.d_ff"]) < 1:
            raise ValueError("model widths must be positive")

    def validate(self):
        """Build every typed view once so field errors surface at load time."""
        n = self["geometry.n_elements"]
        checks = [
            ("geometry", self.geometry),
            ("grid", self.grid),
            ("model", self._check_model),
            ("train", self.train),
            ("iht", lambda: self.iht().validate(n)),
            ("sweep", self.sweep),
        ]
        for section, build in checks:
            try:
                build()
            except ValueError as exc:
                raise ConfigError(section, str(exc)) from None
        if not 0 <= self["sweep.n_missing"] < n:
            raise ConfigError("sweep.n_missing", f"must lie in [0, {n})")
        if self["seed"] < 0:
            raise ConfigError("seed", "must be non-negative")
        if not np.all(np.isfinite(self["sweep.snr_db"])):
            raise ConfigError("sweep.snr_db", "SNR levels must be finite")
        return self
