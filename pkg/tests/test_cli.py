"""Command-line interface: the full train/search/test flow on a tiny network,
config handling, manifests, and exit codes."""

import numpy as np
import pytest

from spikesim.cli import main
from spikesim.dataio import load_checkpoint, read_kv, write_kv

from conftest import I_K_DEFAULT

TINY = {
    "dataset": "synthetic",
    "rows": 4, "cols": 4, "n_classes": 2, "neurons_per_class": 2,
    "topology_seed": 5, "seed": 5,
    "epochs_phase1": 1, "epochs_phase2": 1, "checkpoint_interval": 100,
    "synth_train_per_class": 2, "synth_test_per_class": 1,
    "synth_noise": 0.03, "synth_seed": 11, "synth_test_seed": 12,
}


def write_cfg(path, **extra):
    items = dict(TINY)
    items.update(extra)
    write_kv(path, items)
    return str(path)


@pytest.fixture
def cfg_path(tmp_path):
    return write_cfg(tmp_path / "run.cfg", i_k=I_K_DEFAULT)


def test_calibrate_writes_ik(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "run.cfg")
    assert main(["calibrate", "--config", cfg]) == 0
    assert float(read_kv(cfg)["i_k"]) == I_K_DEFAULT
    assert "797.4" in capsys.readouterr().out


def test_calibrate_no_write(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "run.cfg")
    assert main(["calibrate", "--config", cfg, "--no-write"]) == 0
    assert "i_k" not in read_kv(cfg)


def test_full_flow(tmp_path, cfg_path, capsys):
    out = str(tmp_path / "run")
    assert main(["train", "--phase", "1", "--config", cfg_path, "--out", out]) == 0
    final1 = tmp_path / "run" / "ckpt_phase1_final.bin"
    assert final1.exists()
    assert (tmp_path / "run" / "manifest_phase1.txt").exists()
    manifest = read_kv(tmp_path / "run" / "manifest_phase1.txt")
    assert manifest["net_rows"] == "4"
    assert manifest["dataset_kind"] == "synthetic"
    assert "topology_fingerprint" in manifest

    assert main(["search-weights", "--config", cfg_path,
                 "--from-checkpoint", str(final1), "--out", out,
                 "--lo", "100", "--hi", "400", "--trials", "2",
                 "--write"]) == 0
    assert (tmp_path / "run" / "weight_search.tsv").exists()
    assert "w_feat_readout" in read_kv(cfg_path)

    assert main(["train", "--phase", "2", "--config", cfg_path,
                 "--from-checkpoint", str(final1), "--out", out]) == 0
    final2 = tmp_path / "run" / "ckpt_phase2_final.bin"
    assert load_checkpoint(final2).phase == 2

    capsys.readouterr()
    assert main(["test", "--config", cfg_path, "--checkpoint", str(final2)]) == 0
    report = capsys.readouterr().out
    assert "overall" in report and "class_0" in report

    assert main(["inspect", "--checkpoint", str(final2)]) == 0
    assert "feat_readout" in capsys.readouterr().out


def test_phase1_rerun_byte_identical(tmp_path, cfg_path):
    assert main(["train", "--phase", "1", "--config", cfg_path,
                 "--out", str(tmp_path / "a")]) == 0
    assert main(["train", "--phase", "1", "--config", cfg_path,
                 "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "ckpt_phase1_final.bin").read_bytes()
    b = (tmp_path / "b" / "ckpt_phase1_final.bin").read_bytes()
    assert a == b


def test_phase2_needs_checkpoint(tmp_path, cfg_path):
    code = main(["train", "--phase", "2", "--config", cfg_path,
                 "--out", str(tmp_path / "x")])
    assert code == 1


def test_usage_errors_exit_1(tmp_path):
    assert main(["no-such-command"]) == 1
    assert main(["train", "--config", "x"]) == 1          # missing --phase/--out
    cfg = write_cfg(tmp_path / "c.cfg", dataset="cifar10", i_k=I_K_DEFAULT)
    assert main(["train", "--phase", "1", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 1      # cifar10 without data dir


def test_data_errors_exit_2(tmp_path, cfg_path):
    assert main(["train", "--phase", "1", "--config",
                 str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage")
    assert main(["test", "--config", cfg_path, "--checkpoint", str(bad)]) == 2
    assert main(["inspect", "--checkpoint", str(bad)]) == 2


def test_numeric_errors_exit_3(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", target=60)   # impossible with t_ref=2
    assert main(["calibrate", "--config", cfg]) == 3


def test_missing_ik_is_config_error(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg")   # no i_k key
    assert main(["train", "--phase", "1", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 2
