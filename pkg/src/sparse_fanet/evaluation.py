"""Beamforming spectra and the seeded Monte Carlo MSE-vs-SNR comparison."""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .array_model import DEFAULT_AMP_RANGE, DEFAULT_FOV, manifold, sample_targets, synthesize_clean
from .errors import InvalidArgumentError
from .fanet import ModelConfig, predict
from .iht import IhtConfig, iht_interpolate_many
from .sparsify import add_noise, apply_mask, random_mask
from .tokens import TokenConfig, tokenize_many

DB_FLOOR = -300.0
EVAL_POINTS = 512
METHODS = ("input", "iht", "fanet")


# ---------------------------------------------------------------- spectra


@dataclass(frozen=True, eq=False)
class BfSpectrum:
    angles: np.ndarray
    power_db: np.ndarray

    def to_csv(self, meta=None):
        buf = io.StringIO()
        if meta:
            buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["angle_deg", "power_db"])
        for a, p in zip(self.angles, self.power_db):
            w.writerow([repr(float(a)), repr(float(p))])
        return buf.getvalue()


def eval_grid(fov=DEFAULT_FOV, points=EVAL_POINTS):
    return np.linspace(float(fov[0]), float(fov[1]), int(points))


def bf_spectrum(snapshot, geometry, angles=None, normalize=False):
    """Matched-filter power ``|a(theta)^H y|^2 / N^2`` in dB, floored at -300 dB."""
    angles = eval_grid() if angles is None else np.asarray(angles, dtype=np.float64)
    if angles.size == 0:
        raise InvalidArgumentError("evaluation grid must be non-empty")
    y = np.asarray(snapshot, dtype=np.complex128)
    n = geometry.n_elements
    power = np.abs(manifold(geometry, angles).conj().T @ y) ** 2 / n ** 2
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power)
    db = np.maximum(np.nan_to_num(db, nan=DB_FLOOR, neginf=DB_FLOOR), DB_FLOOR)
    if normalize and db.max() > DB_FLOOR:
        db = db - db.max()
    return BfSpectrum(angles, db)


def peak_sidelobe_ratio(spectrum, target_angles, geometry):
    """Peak level minus the largest level outside every target's main lobe, in dB.

    A main lobe spans the first nulls, ``|sin(theta) - sin(theta_k)| < 1/aperture``
    with the aperture ``N * mean spacing`` in wavelengths.
    """
    d = geometry.spacings
    n = geometry.n_elements
    aperture = n * (d[-1] / (n - 1))
    u = np.sin(np.deg2rad(spectrum.angles))
    inside = np.zeros(u.shape, dtype=bool)
    for t in np.atleast_1d(target_angles):
        inside |= np.abs(u - np.sin(np.deg2rad(t))) < 1.0 / aperture
    if inside.all() or not inside.any():
        raise InvalidArgumentError("main lobes must cover part, not all, of the grid")
    return float(spectrum.power_db.max() - spectrum.power_db[~inside].max())


# ---------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepConfig:
    snr_db: tuple = (10.0, 15.0, 20.0, 25.0, 30.0)
    n_trials: int = 500
    n_missing: int = 8
    n_targets: int = 2
    master_seed: int = 0
    fov: tuple = DEFAULT_FOV
    amp_range: tuple = DEFAULT_AMP_RANGE

    def __post_init__(self):
        if self.n_trials < 0 or self.n_targets < 1 or self.n_missing < 0:
            raise InvalidArgumentError("n_trials, n_missing must be >= 0 and n_targets >= 1")

    @classmethod
    def strict_paper(cls, **overrides):
        return cls(**{"n_trials": 5000, **overrides})


@dataclass(frozen=True, eq=False)
class TrialRecord:
    trial_id: int
    snr_db: float
    missing: tuple
    angles: np.ndarray
    coefficients: np.ndarray
    mse_input: float
    mse_iht: float
    mse_fanet: float  # nan when no model was supplied
    iht_iters: int
    iht_converged: bool

    def mse(self, method):
        return {"input": self.mse_input, "iht": self.mse_iht, "fanet": self.mse_fanet}[method]


@dataclass
class Trials:
    clean: np.ndarray
    sparse: np.ndarray
    observed: np.ndarray
    targets: list = field(default_factory=list)


def _row_mse(a, b):
    d = a - b
    return np.mean(d.real ** 2 + d.imag ** 2, axis=-1)


def draw_trials(sweep, geometry, snr_index, snr_db):
    """Scenes and masks depend on the trial only (shared across SNR levels); noise
    is keyed by (SNR index, trial)."""
    n = geometry.n_elements
    T = sweep.n_trials
    trials = Trials(np.empty((T, n), complex), np.empty((T, n), complex), np.empty((T, n), bool))
    seed = sweep.master_seed
    for t in range(T):
        tg = sample_targets(seeding.stream(seed, seeding.SCENE, t), sweep.fov,
                            amp_range=sweep.amp_range, n_targets=sweep.n_targets)
        mask = random_mask(seeding.stream(seed, seeding.MASK, t), n, sweep.n_missing)
        clean = synthesize_clean(geometry, tg)
        noisy = add_noise(clean, snr_db, seeding.stream(seed, seeding.NOISE, snr_index, t))
        trials.clean[t] = clean
        trials.sparse[t] = apply_mask(noisy, mask)
        trials.observed[t] = mask.observed
        trials.targets.append(tg)
    return trials


def fanet_reconstruct(params, sparse, observed, grid, model_cfg=ModelConfig(),
                      token_cfg=TokenConfig()):
    X = tokenize_many(sparse, observed, grid, token_cfg, params.dtype)
    return np.asarray(predict(X, params, grid, model_cfg), dtype=np.complex128)


def run_mse_sweep(model, iht_cfg, sweep, geometry, grid, model_cfg=ModelConfig(),
                  token_cfg=TokenConfig()):
    """Monte Carlo comparison of the zero-filled input, IHT and (optionally) FA-Net.

    ``model`` may be ``None`` to skip the network; its MSE column is then NaN.
    """
    records = []
    if sweep.n_trials == 0:
        return records
    for si, snr in enumerate(sweep.snr_db):
        tr = draw_trials(sweep, geometry, si, float(snr))
        X_iht, iters, conv = iht_interpolate_many(tr.sparse, tr.observed, iht_cfg)
        mse_in = _row_mse(tr.sparse, tr.clean)
        mse_iht = _row_mse(X_iht, tr.clean)
        if model is not None:
            mse_fa = _row_mse(fanet_reconstruct(model, tr.sparse, tr.observed, grid,
                                                model_cfg, token_cfg), tr.clean)
        else:
            mse_fa = np.full(sweep.n_trials, np.nan)
        for t in range(sweep.n_trials):
            tg = tr.targets[t]
            records.append(TrialRecord(
                t, float(snr), tuple(int(i) for i in np.flatnonzero(~tr.observed[t])),
                tg.angles, tg.coefficients, float(mse_in[t]), float(mse_iht[t]),
                float(mse_fa[t]), int(iters[t]), bool(conv[t]),
            ))
    return records


@dataclass(frozen=True)
class SummaryRow:
    snr_db: float
    method: str
    mean_mse: float
    stderr_mse: float
    n_trials: int


def summarize(records, methods=METHODS):
    """Per-(SNR, method) mean and standard error, SNR ascending."""
    if not records:
        raise InvalidArgumentError("cannot summarize an empty record list")
    groups = {}
    for r in records:
        groups.setdefault(r.snr_db, []).append(r)
    rows = []
    for snr in sorted(groups):
        for m in methods:
            vals = np.array([r.mse(m) for r in groups[snr]], dtype=np.float64)
            if np.all(np.isnan(vals)):
                continue
            k = vals.size
            se = float(np.std(vals, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
            rows.append(SummaryRow(snr, m, float(np.mean(vals)), se, k))
    return rows


def summary_table(rows):
    """``{method: {snr: mean_mse}}`` view of :func:`summarize` output."""
    out = {}
    for r in rows:
        out.setdefault(r.method, {})[r.snr_db] = r.mean_mse
    return out


def records_csv(records, methods=METHODS):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial_id", "snr_db", "missing_idx", "method", "mse"])
    for r in records:
        missing = ";".join(str(i) for i in r.missing)
        for m in methods:
            v = r.mse(m)
            if not math.isnan(v):
                w.writerow([r.trial_id, repr(r.snr_db), missing, m, repr(v)])
    return buf.getvalue()


def summary_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "method", "mean_mse", "stderr_mse", "n_trials"])
    for r in rows:
        w.writerow([repr(r.snr_db), r.method, repr(r.mean_mse), repr(r.stderr_mse), r.n_trials])
    return buf.getvalue()


# ---------------------------------------------------------------- panels


@dataclass(frozen=True, eq=False)
class Panel:
    """The four signals behind one reconstruction figure plus their spectra."""

    targets: object
    observed: np.ndarray
    snr_db: float
    snapshots: dict  # name -> complex snapshot
    spectra: dict  # name -> BfSpectrum
    iht_converged: bool


def reconstruct_panel(params, targets, mask, snr_db, noise_seed, geometry, grid,
                      iht_cfg=None, model_cfg=ModelConfig(), token_cfg=TokenConfig(),
                      angles=None):
    iht_cfg = iht_cfg or IhtConfig.for_array(geometry.n_elements)
    clean = synthesize_clean(geometry, targets)
    sparse = apply_mask(add_noise(clean, snr_db, noise_seed), mask)
    res = iht_interpolate_many(sparse[None], mask.observed[None], iht_cfg)
    snaps = {"clean": clean, "sparse_noisy": sparse, "iht": res[0][0]}
    if params is not None:
        snaps["fanet"] = fanet_reconstruct(params, sparse[None], mask.observed[None], grid,
                                           model_cfg, token_cfg)[0]
    angles = eval_grid(grid.fov) if angles is None else angles
    spectra = {k: bf_spectrum(v, geometry, angles) for k, v in snaps.items()}
    return Panel(targets, mask.observed, float(snr_db), snaps, spectra, bool(res[2][0]))
