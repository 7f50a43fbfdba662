"""Counter-based random streams.

Every random draw in the package comes from ``stream(master_seed, tag, *idx)``
so that any record, batch or trial can be regenerated in isolation and the
result never depends on evaluation order or worker count.
"""
import numpy as np

# Stream tags; values are part of the reproducibility contract, never reorder.
DATASET = 1
SHUFFLE = 2
AUGMENT = 3
INIT = 4
HOLDOUT = 5
SCENE = 6
MASK = 7
NOISE = 8


def stream(*keys):
    """Return a fresh Generator keyed by a tuple of non-negative ints."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def as_generator(seed):
    """Accept an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.default_rng(seed)
