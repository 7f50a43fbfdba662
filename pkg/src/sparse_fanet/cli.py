"""``sparse-fanet`` command line: gen, train, reconstruct, sweep.

Exit codes: 0 success, 2 config/validation error, 3 numerical abort, 4 I/O error.
"""
import argparse
import contextlib
import logging
import os
import sys

import numpy as np

from . import _kernels, seeding
from .array_model import TargetSet, sample_targets
from .config import ConfigError, RunConfig
from .containers import DatasetHeader, load_checkpoint, serialize_params, write_dataset
from .errors import FormatError, TrainingDivergedError
from .evaluation import records_csv, reconstruct_panel, run_mse_sweep, summarize, summary_csv
from .sparsify import SparseMask, random_mask
from .training import train

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("sparse_fanet")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load_config(args):
    try:
        if args.config:
            cfg = RunConfig.load(args.config, strict_paper=args.strict_paper)
        else:
            cfg = RunConfig.defaults(strict_paper=args.strict_paper)
        if args.seed is not None:
            cfg.set("seed", str(args.seed))
        if args.out is not None:
            cfg.set("out", args.out)
        return cfg.validate()
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read config: {exc}") from None
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config: {exc}") from None


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None


def _out_dir(cfg):
    out = cfg["out"]
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc}") from None
    _write(os.path.join(out, "resolved_config.txt"), cfg.dump())
    return out


def _load_model(path, cfg):
    """Load a checkpoint and check it against the run config."""
    try:
        ckpt = load_checkpoint(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read checkpoint: {exc}") from None
    except FormatError as exc:
        raise CliError(EXIT_CONFIG, f"bad checkpoint: {exc}") from None
    n = cfg["geometry.n_elements"]
    want_f = cfg.tokens().width(n)
    F, D, d, H = ckpt.params.dims
    problems = []
    if F != want_f:
        problems.append(f"token width {F} != {want_f} expected for N={n}")
    if (D, d, H) != (cfg.model().d_embed, cfg.model().d_attn, cfg.model().d_ff):
        problems.append(f"model dims {(D, d, H)} differ from config")
    if ckpt.model_cfg != cfg.model():
        problems.append("residual/layer_norm flags differ from config")
    if ckpt.token_cfg != cfg.tokens():
        problems.append("token feature flags differ from config")
    if problems:
        raise CliError(EXIT_CONFIG, "checkpoint does not match config: " + "; ".join(problems))
    return ckpt


# ---------------------------------------------------------------- commands


def cmd_gen(args):
    cfg = _load_config(args)
    out = _out_dir(cfg)
    tc = cfg.train()
    header = DatasetHeader(cfg.geometry(), tc.n_signals, cfg["seed"], cfg["grid.fov"],
                           tc.k_max, tc.amp_range)
    path = os.path.join(out, "dataset.fads")
    try:
        write_dataset(path, header)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None
    log.info("wrote %d records to %s", header.count, path)
    return EXIT_OK


def cmd_train(args):
    cfg = _load_config(args)
    out = _out_dir(cfg)
    geometry = cfg.geometry()
    try:
        params, history = train(cfg.train(), geometry, cfg.grid(geometry), cfg.model(),
                                cfg.tokens())
    except TrainingDivergedError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(os.path.join(out, "checkpoint.fanw"),
           serialize_params(params, cfg.model(), cfg.tokens(), cfg["seed"]))
    _write(os.path.join(out, "train_log.csv"), history.to_csv())
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load_config(args)
    geometry = cfg.geometry()
    grid = cfg.grid(geometry)
    params = None
    if not args.iht_only:
        if not args.checkpoint:
            raise CliError(EXIT_CONFIG, "--checkpoint is required unless --iht-only is given")
        params = _load_model(args.checkpoint, cfg).params
    out = _out_dir(cfg)
    records = run_mse_sweep(params, cfg.iht(), cfg.sweep(), geometry, grid, cfg.model(),
                            cfg.tokens())
    _write(os.path.join(out, "records.csv"), records_csv(records))
    rows = summarize(records) if records else []
    _write(os.path.join(out, "summary.csv"), summary_csv(rows))
    failed = sum(not r.iht_converged for r in records)
    print(f"{len(records)} trials, {failed} IHT runs hit max_iters", file=sys.stderr)
    return EXIT_OK


def _parse_pairs(text):
    out = {}
    for item in _split_items(text):
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _split_items(text):
    # "missing=8,seed=7" and "angles=10,-5;amps=1,0.8" are both accepted
    if ";" in text:
        return [s for s in text.split(";") if s.strip()]
    items, current = [], None
    for tok in text.split(","):
        if "=" in tok:
            if current is not None:
                items.append(current)
            current = tok
        elif current is not None:
            current += "," + tok
        else:
            raise ValueError(f"cannot parse {text!r}")
    if current is not None:
        items.append(current)
    return items


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_mask(spec, n):
    pairs = _parse_pairs(spec)
    if "idx" in pairs:
        idx = [int(v) for v in pairs["idx"].split(",") if v.strip()]
        return SparseMask.from_missing(n, idx)
    if "missing" in pairs:
        return random_mask(int(pairs.get("seed", 0)), n, int(pairs["missing"]))
    raise ValueError("mask spec needs 'idx=...' or 'missing=COUNT,seed=INT'")


def _parse_scene(args, cfg):
    if args.scene:
        pairs = _parse_pairs(args.scene)
        angles = _floats(pairs["angles"])
        amps = _floats(pairs.get("amps", ",".join(["1"] * len(angles))))
        phases = _floats(pairs.get("phases", ",".join(["0"] * len(angles))))
        if not len(angles) == len(amps) == len(phases):
            raise ValueError("angles, amps and phases must have equal lengths")
        return TargetSet(angles, np.asarray(amps) * np.exp(1j * np.asarray(phases)))
    seed = cfg["seed"] if args.scene_seed is None else args.scene_seed
    return sample_targets(seeding.stream(seed, seeding.SCENE), cfg["grid.fov"],
                          amp_range=cfg["train.amp_range"], n_targets=cfg["sweep.n_targets"])


def cmd_reconstruct(args):
    cfg = _load_config(args)
    geometry = cfg.geometry()
    grid = cfg.grid(geometry)
    ckpt = _load_model(args.checkpoint, cfg)
    try:
        mask = _parse_mask(args.mask, geometry.n_elements)
        targets = _parse_scene(args, cfg)
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid scene/mask: {exc}") from None
    out = _out_dir(cfg)
    panel = reconstruct_panel(ckpt.params, targets, mask, args.snr,
                              seeding.stream(cfg["seed"], seeding.NOISE), geometry, grid,
                              cfg.iht(), cfg.model(), cfg.tokens())
    meta_common = {"snr_db": repr(float(args.snr)),
                   "angles_deg": ";".join(repr(float(a)) for a in targets.angles),
                   "missing_idx": ";".join(str(i) for i in mask.missing)}
    for name, spec in panel.spectra.items():
        _write(os.path.join(out, f"spectrum_{name}.csv"), spec.to_csv({"curve": name, **meta_common}))
    lines = ["element,observed\n"] + [f"{i},{int(o)}\n" for i, o in enumerate(mask.observed)]
    _write(os.path.join(out, "sparse_geometry.csv"), "".join(lines))
    cols = list(panel.snapshots)
    rows = ["element," + ",".join(f"{c}_re,{c}_im" for c in cols) + "\n"]
    for i in range(geometry.n_elements):
        vals = []
        for c in cols:
            z = complex(panel.snapshots[c][i])
            vals += [repr(z.real), repr(z.imag)]
        rows.append(f"{i}," + ",".join(vals) + "\n")
    _write(os.path.join(out, "snapshots.csv"), "".join(rows))
    return EXIT_OK


# ---------------------------------------------------------------- entry


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value run configuration")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument("--threads", type=int, default=None,
                        help="cap BLAS and numba worker threads (outputs do not change)")
    common.add_argument("--strict-paper", action="store_true",
                        help="start from the full-scale training and sweep defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sparse-fanet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write a synthetic dataset container")
    sub.add_parser("train", parents=[common], help="train FA-Net and write a checkpoint")
    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo MSE-vs-SNR comparison")
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--iht-only", action="store_true", help="skip the network column")
    p = sub.add_parser("reconstruct", parents=[common], help="spectra for one scene")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--mask", default="missing=8,seed=0",
                   help="'missing=COUNT,seed=INT' or 'idx=I,J,...' (missing elements)")
    p.add_argument("--scene", help="'angles=A,B;amps=X,Y;phases=P,Q' (degrees, radians)")
    p.add_argument("--scene-seed", type=int, help="draw the scene from this seed instead")
    p.add_argument("--snr", type=float, default=10.0, help="SNR in dB (inf for noiseless)")
    return parser


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "sweep": cmd_sweep, "reconstruct": cmd_reconstruct}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    limit = contextlib.nullcontext()
    if args.threads:
        from threadpoolctl import threadpool_limits

        limit = threadpool_limits(args.threads)
        _kernels.set_num_threads(args.threads)
    try:
        with limit:
            return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
