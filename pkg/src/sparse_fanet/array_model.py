"""Far-field single-snapshot ULA signal model.

Angles are in degrees at every public boundary and element positions are in
wavelengths, so the phase of element ``n`` for a plane wave from ``theta`` is
``2*pi*d_n*sin(theta)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .seeding import as_generator

DEFAULT_FOV = (-30.0, 30.0)
DEFAULT_AMP_RANGE = (0.5, 1.0)
DEFAULT_K_MAX = 2


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element offsets ``spacings[n]`` from the reference element, in wavelengths."""

    spacings: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.spacings, dtype=np.float64).ravel()
        if d.size < 1:
            raise InvalidArgumentError("geometry needs at least one element")
        if d[0] != 0.0:
            raise InvalidArgumentError("reference element must sit at offset 0")
        if not np.all(np.isfinite(d)) or np.any(np.diff(d) <= 0):
            raise InvalidArgumentError("spacings must be finite and strictly increasing")
        d.setflags(write=False)
        object.__setattr__(self, "spacings", d)

    @classmethod
    def ula(cls, n_elements=20, spacing=0.5):
        if int(n_elements) < 1:
            raise InvalidArgumentError("n_elements must be positive")
        if not spacing > 0:
            raise InvalidArgumentError("spacing must be positive")
        return cls(np.arange(int(n_elements)) * float(spacing))

    @property
    def n_elements(self):
        return self.spacings.shape[0]

    def __eq__(self, other):
        return isinstance(other, ArrayGeometry) and np.array_equal(
            self.spacings, other.spacings
        )

    def __hash__(self):
        return hash(self.spacings.tobytes())


@dataclass(frozen=True, eq=False)
class TargetSet:
    angles: np.ndarray  # degrees
    coefficients: np.ndarray  # complex reflection coefficients

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=np.float64).ravel()
        s = np.asarray(self.coefficients, dtype=np.complex128).ravel()
        if a.size < 1 or a.size != s.size:
            raise InvalidArgumentError("need matching, non-empty angles and coefficients")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "coefficients", s)

    @property
    def k(self):
        return self.angles.shape[0]


def _check_interval(name, interval):
    lo, hi = (float(v) for v in interval)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
        raise InvalidArgumentError(f"{name} must be a finite interval lo <= hi, got {interval!r}")
    return lo, hi


def steering_vector(geometry, theta):
    """Return ``a(theta)``: element n is ``exp(i*2*pi*d_n*sin(theta))``."""
    return manifold(geometry, [float(theta)])[:, 0]


def manifold(geometry, angles):
    """N x K matrix whose k-th column is ``steering_vector(geometry, angles[k])``."""
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if angles.ndim != 1 or angles.size == 0:
        raise InvalidArgumentError("manifold needs a non-empty 1-D list of angles")
    if not np.all(np.isfinite(angles)):
        raise InvalidArgumentError("angles must be finite")
    phase = 2.0 * np.pi * np.outer(geometry.spacings, np.sin(np.deg2rad(angles)))
    return np.exp(1j * phase)


def synthesize_clean(geometry, targets):
    """Noise-free snapshot ``A(theta) @ s``."""
    return manifold(geometry, targets.angles) @ targets.coefficients


def sample_targets(seed, fov=DEFAULT_FOV, k_max=DEFAULT_K_MAX,
                   amp_range=DEFAULT_AMP_RANGE, n_targets=None):
    """Draw a random scene.

    ``K`` is uniform on ``1..k_max`` unless ``n_targets`` pins it.  Angles are
    uniform on ``fov`` (off-grid), magnitudes uniform on ``amp_range`` and
    phases uniform on ``[0, 2*pi)``.
    """
    lo, hi = _check_interval("fov", fov)
    if hi == lo:
        raise InvalidArgumentError("fov must be non-degenerate")
    a_lo, a_hi = _check_interval("amp_range", amp_range)
    if int(k_max) < 1:
        raise InvalidArgumentError("k_max must be >= 1")
    rng = as_generator(seed)
    if n_targets is None:
        k = int(rng.integers(1, int(k_max) + 1))
    else:
        k = int(n_targets)
        if k < 1:
            raise InvalidArgumentError("n_targets must be >= 1")
    angles = rng.uniform(lo, hi, size=k)
    mags = rng.uniform(a_lo, a_hi, size=k) if a_hi > a_lo else np.full(k, a_lo)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
    return TargetSet(angles, mags * np.exp(1j * phases))
