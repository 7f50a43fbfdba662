import os

import pytest

from sparse_fanet.cli import main
from sparse_fanet.config import ConfigError, RunConfig
from sparse_fanet.containers import load_checkpoint, read_dataset, verify_dataset

TINY = """\
# small enough to run in a second or two
model.d_embed = 8
model.d_attn = 4
model.d_ff = 8
train.n_signals = 32
train.epochs = 2
train.batch_size = 16
train.n_holdout = 8
sweep.n_trials = 3
sweep.snr_db = 10, 30
"""


def test_defaults_and_parse():
    cfg = RunConfig.parse("train.lr = 0.01\nmodel.layer_norm = true  # comment\n")
    assert cfg["train.lr"] == 0.01 and cfg.model().layer_norm
    assert cfg.iht().pencil == 10
    assert cfg.train().n_signals == 8192


def test_strict_paper_defaults():
    cfg = RunConfig.defaults(strict_paper=True).validate()
    tc = cfg.train()
    assert (tc.n_signals, tc.epochs, tc.batch_size, tc.lr) == (131072, 500, 512, 1e-3)
    assert cfg.sweep().n_trials == 5000


@pytest.mark.parametrize("text, key", [
    ("train.btach_size = 3", "train.btach_size"),
    ("train.epochs = many", "train.epochs"),
    ("grid.fov = 1", "grid.fov"),
    ("iht.rank = 50", "iht"),
    ("sweep.n_missing = 20", "sweep.n_missing"),
    ("model.residual = maybe", "model.residual"),
])
def test_field_level_errors(text, key):
    with pytest.raises(ConfigError) as exc:
        RunConfig.parse(text)
    assert exc.value.key == key


def test_no_equals_sign():
    with pytest.raises(ConfigError):
        RunConfig.parse("train.epochs 3")


def test_dump_round_trip():
    cfg = RunConfig.parse(TINY + "grid.fov = -20, 25\ntrain.snr_db = inf, inf\n")
    again = RunConfig.parse(cfg.dump())
    assert again.values == cfg.values


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    conf = root / "tiny.conf"
    conf.write_text(TINY)
    out = root / "train"
    assert main(["train", "--config", str(conf), "--out", str(out), "--seed", "5"]) == 0
    return conf, out


def test_train_outputs(trained):
    conf, out = trained
    names = sorted(os.listdir(out))
    assert names == ["checkpoint.fanw", "resolved_config.txt", "train_log.csv"]
    ck = load_checkpoint(out / "checkpoint.fanw")
    assert ck.params.dims == (81, 8, 4, 8) and ck.seed == 5
    assert (out / "train_log.csv").read_text().count("\n") == 3
    echoed = RunConfig.load(out / "resolved_config.txt")
    assert echoed["seed"] == 5 and echoed["train.n_signals"] == 32


def test_resolved_config_reruns_identically(trained, tmp_path):
    conf, out = trained
    assert main(["train", "--config", str(out / "resolved_config.txt"), "--out", str(tmp_path)]) == 0
    a = (out / "checkpoint.fanw").read_bytes()
    assert (tmp_path / "checkpoint.fanw").read_bytes() == a


def test_threads_flag_keeps_outputs(trained, tmp_path):
    conf, out = trained
    assert main(["train", "--config", str(conf), "--seed", "5", "--out", str(tmp_path),
                 "--threads", "1"]) == 0
    assert (tmp_path / "checkpoint.fanw").read_bytes() == (out / "checkpoint.fanw").read_bytes()


def test_sweep_outputs(trained, tmp_path, capsys):
    conf, out = trained
    args = ["sweep", "--config", str(conf), "--checkpoint", str(out / "checkpoint.fanw")]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    rec = (tmp_path / "a" / "records.csv").read_text()
    assert rec == (tmp_path / "b" / "records.csv").read_text()
    assert len(rec.splitlines()) == 1 + 2 * 3 * 3
    assert "IHT runs hit max_iters" in capsys.readouterr().err
    summary = (tmp_path / "a" / "summary.csv").read_text().splitlines()
    assert summary[0] == "snr_db,method,mean_mse,stderr_mse,n_trials" and len(summary) == 7


def test_sweep_zero_trials(trained, tmp_path):
    conf, out = trained
    assert main(["sweep", "--config", str(conf), "--iht-only", "--out", str(tmp_path)]) == 0
    cfg_path = tmp_path / "zero.conf"
    cfg_path.write_text("sweep.n_trials = 0\n")
    assert main(["sweep", "--config", str(cfg_path), "--iht-only", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "records.csv").read_text() == "trial_id,snr_db,missing_idx,method,mse\n"


def test_sweep_needs_checkpoint(tmp_path):
    assert main(["sweep", "--out", str(tmp_path)]) == 2


def test_reconstruct_panel_set(trained, tmp_path):
    conf, out = trained
    ck = str(out / "checkpoint.fanw")
    assert main(["reconstruct", "--config", str(conf), "--checkpoint", ck, "--out", str(tmp_path),
                 "--mask", "missing=8,seed=7", "--scene", "angles=-10,15;amps=1,0.8"]) == 0
    for name in ("clean", "sparse_noisy", "iht", "fanet"):
        lines = (tmp_path / f"spectrum_{name}.csv").read_text().splitlines()
        assert lines[0].startswith(f"# curve={name}") and lines[1] == "angle_deg,power_db"
        assert len(lines) == 2 + 512
    geo = (tmp_path / "sparse_geometry.csv").read_text().splitlines()
    assert geo[0] == "element,observed" and sum(l.endswith(",0") for l in geo[1:]) == 8


def test_reconstruct_full_array(trained, tmp_path):
    conf, out = trained
    assert main(["reconstruct", "--config", str(conf), "--checkpoint", str(out / "checkpoint.fanw"),
                 "--out", str(tmp_path), "--mask", "idx=", "--snr", "inf"]) == 0
    geo = (tmp_path / "sparse_geometry.csv").read_text().splitlines()[1:]
    assert all(l.endswith(",1") for l in geo)
    header = (tmp_path / "spectrum_clean.csv").read_text().splitlines()[0]
    assert header.endswith("missing_idx=") and "snr_db=inf" in header


@pytest.mark.parametrize("mask", ["idx=3,20", "idx=-1", "bogus"])
def test_reconstruct_bad_mask(trained, tmp_path, mask):
    conf, out = trained
    assert main(["reconstruct", "--config", str(conf), "--checkpoint", str(out / "checkpoint.fanw"),
                 "--out", str(tmp_path), "--mask", mask]) == 2


def test_checkpoint_mismatch(trained, tmp_path):
    conf, out = trained
    other = tmp_path / "other.conf"
    other.write_text(TINY.replace("model.d_ff = 8", "model.d_ff = 16"))
    assert main(["reconstruct", "--config", str(other), "--checkpoint",
                 str(out / "checkpoint.fanw"), "--out", str(tmp_path)]) == 2
    other.write_text(TINY + "geometry.n_elements = 16\n")
    assert main(["sweep", "--config", str(other), "--checkpoint",
                 str(out / "checkpoint.fanw"), "--out", str(tmp_path)]) == 2


def test_corrupt_checkpoint(tmp_path):
    bad = tmp_path / "bad.fanw"
    bad.write_bytes(b"NOPE" + bytes(60))
    assert main(["reconstruct", "--checkpoint", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["reconstruct", "--checkpoint", str(tmp_path / "absent"),
                 "--out", str(tmp_path)]) == 4


def test_missing_and_invalid_config(tmp_path):
    assert main(["train", "--config", str(tmp_path / "nope.conf")]) == 2
    bad = tmp_path / "bad.conf"
    bad.write_text("train.unknown = 1\n")
    assert main(["gen", "--config", str(bad)]) == 2


def test_gen_writes_verifiable_dataset(tmp_path):
    conf = tmp_path / "g.conf"
    conf.write_text("train.n_signals = 1\n")
    assert main(["gen", "--config", str(conf), "--out", str(tmp_path), "--seed", "3"]) == 0
    header, clean, _ = read_dataset(tmp_path / "dataset.fads")
    assert header.count == 1 and clean.shape == (1, 20) and header.seed == 3
    assert verify_dataset(tmp_path / "dataset.fads")


def test_gen_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen", "--out", str(blocker / "sub")]) == 4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_abort_exit_code(tmp_path):
    conf = tmp_path / "nan.conf"
    conf.write_text(TINY + "train.lr = 1e30\n")
    assert main(["train", "--config", str(conf), "--out", str(tmp_path)]) == 3
