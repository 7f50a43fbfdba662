"""Wall-clock comparison of the numba and numpy IHT backends.

    python3 benchmarks/bench_kernels.py [--trials 500] [--repeat 3]

The first numba call compiles (or loads the on-disk cache) and is reported
separately.  Both backends run the same batch, and the script checks that
their outputs agree before printing timings.
"""
import argparse
import time

import numpy as np

from sparse_fanet import _kernels
from sparse_fanet.array_model import ArrayGeometry, sample_targets, synthesize_clean
from sparse_fanet.iht import IhtConfig, iht_interpolate_many
from sparse_fanet.sparsify import add_noise, random_mask


def make_batch(trials, n=20, missing=8, snr_db=20.0, seed=0):
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry.ula(n)
    Y = np.empty((trials, n), complex)
    obs = np.empty((trials, n), bool)
    for t in range(trials):
        clean = synthesize_clean(geom, sample_targets(rng, n_targets=2))
        m = random_mask(rng, n, missing)
        Y[t] = np.where(m.observed, add_noise(clean, snr_db, rng), 0)
        obs[t] = m.observed
    return Y, obs


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    Y, obs = make_batch(args.trials)
    cfg = IhtConfig()
    run = lambda: iht_interpolate_many(Y, obs, cfg)  # noqa: E731

    previous = _kernels.get_backend()
    results = {}
    try:
        _kernels.set_backend("numba")
        t0 = time.perf_counter()
        iht_interpolate_many(Y[:1], obs[:1], cfg)
        warmup = time.perf_counter() - t0
        results["numba"] = best_of(run, args.repeat)
        _kernels.set_backend("numpy")
        results["numpy"] = best_of(run, args.repeat)
    finally:
        _kernels.set_backend(previous)

    (t_nb, (x_nb, it_nb, _)), (t_np, (x_np, it_np, _)) = results["numba"], results["numpy"]
    diff = float(np.max(np.abs(x_nb - x_np)))
    print(f"trials={args.trials} N=20 missing=8 rank={cfg.rank} L={cfg.pencil}")
    print(f"numba warm-up (compile or cache load): {warmup:.2f} s")
    print(f"numba  {t_nb:8.3f} s  ({1e3 * t_nb / args.trials:.3f} ms/trial)")
    print(f"numpy  {t_np:8.3f} s  ({1e3 * t_np / args.trials:.3f} ms/trial)")
    print(f"speed-up {t_np / t_nb:.1f}x; mean iterations {it_nb.mean():.1f}; "
          f"max |numba - numpy| = {diff:.2e}; identical iteration counts: "
          f"{bool(np.array_equal(it_nb, it_np))}")


if __name__ == "__main__":
    main()
