import json

import numpy as np
import pytest

from mmgzsl import checkpoint
from mmgzsl import evaluate as ev
from mmgzsl.cli import main
from mmgzsl.dataio import load_features

TINY = """\
data: {dim: 6, samples_per_class: 10}
cycle: {epochs: 2, generator_hidden: 6, discriminator_hidden: 6, batch_size: 16}
synth:
  pretrain_epochs: 2
  joint_epochs: 2
  batch_size: 12
  latent_dim: 3
  encoder_hidden: [8]
  generator_hidden: [8]
  regressor_hidden: [6]
eval: {synth_per_class: 20, seeds: 2, classifier: {epochs: 5}}
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return path


def run(*argv, env=None):
    return main(list(argv), environ=env or {})


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and not p.name.startswith("effective_config")}


def test_gen_data_writes_paired_files(tmp_path, config):
    out = tmp_path / "run"
    assert run("gen-data", "--config", str(config), "--out", str(out)) == 0
    names = sorted(p.name for p in (out / "data").iterdir())
    assert names == ["dp.feat", "dp.json", "manifest.json", "mri.feat", "mri.json"]
    mri = load_features(out / "data" / "mri")
    assert len(mri) == 5 * 10 and mri.dim == 6
    manifest = json.loads((out / "data" / "manifest.json").read_text())
    assert manifest["records"] == 50
    echoed = json.loads((out / "effective_config_gen-data.json").read_text())
    assert echoed["config"]["data"]["dim"] == 6


def test_gen_data_is_byte_identical_for_a_repeated_seed(tmp_path, config):
    for name in ("a", "b"):
        assert run("gen-data", "--config", str(config), "--seed", "7",
                   "--out", str(tmp_path / name)) == 0
    assert _tree(tmp_path / "a" / "data") == _tree(tmp_path / "b" / "data")
    run("gen-data", "--config", str(config), "--seed", "8", "--out", str(tmp_path / "c"))
    assert _tree(tmp_path / "a" / "data") != _tree(tmp_path / "c" / "data")


def test_invalid_dim_exits_2_naming_the_field(tmp_path, config, capsys):
    code = run("gen-data", "--config", str(config), "--out", str(tmp_path),
               env={"MMGZSL_DATA__DIM": "0"})
    assert code == 2
    assert "data.dim" in capsys.readouterr().err


def test_train_without_features_exits_2_naming_the_path(tmp_path, config, capsys):
    assert run("train", "--config", str(config), "--out", str(tmp_path / "empty")) == 2
    assert str(tmp_path / "empty" / "data" / "mri") in capsys.readouterr().err


def _prepare(root, config, *extra):
    assert run("gen-data", "--config", str(config), "--out", str(root)) == 0
    assert run("train", "--config", str(config), "--out", str(root), *extra) == 0


def test_train_writes_two_checkpoints_and_histories(tmp_path, config):
    _prepare(tmp_path / "a", config)
    ckpts = sorted((tmp_path / "a" / "checkpoints").iterdir())
    assert [p.name.split("-")[0] for p in ckpts] == ["cvae", "cycle"]
    cycle_csv = (tmp_path / "a" / "histories" / "cycle_seed0.csv").read_text().splitlines()
    assert cycle_csv[0] == "epoch,L_adv_GDY,L_adv_FDX,L_cyc" and len(cycle_csv) == 3
    synth_csv = (tmp_path / "a" / "histories" / "synth_full_seed0.csv").read_text().splitlines()
    assert synth_csv[0] == "epoch,L_CVAE,L_c,L_reg,L_E,L_CPC,L_R_sup,L_R_unsup"
    assert (tmp_path / "a" / "figures" / "losses_full_seed0.png").exists()

    _prepare(tmp_path / "b", config)
    again = sorted((tmp_path / "b" / "checkpoints").iterdir())
    assert [checkpoint.sha256(p) for p in ckpts] == [checkpoint.sha256(p) for p in again]


def test_evaluate_reports_every_column(tmp_path, config, capsys):
    root = tmp_path / "r"
    _prepare(root, config)
    capsys.readouterr()
    assert run("evaluate", "--config", str(config), "--out", str(root)) == 0
    table = (root / "reports" / "report_full_seed0.txt").read_text().splitlines()
    assert table[0].split() == ["Method", "Acc_S", "Acc_U", "H", "p", "Sen_S", "Spe_S",
                                "Sen_U", "Spe_U"]
    cells = table[1].split()
    assert cells[0] == "MM_GZSL" and cells[4] == "-"
    assert all("(" in c for c in cells[1:4] + cells[5:])
    report = json.loads((root / "reports" / "report_full_seed0.json").read_text())
    rep = report["reports"][0]
    for key in ("acc_S", "acc_U", "H", "sen_S", "spe_S", "sen_U", "spe_U"):
        assert 0 <= rep[key] <= 100
    syn = load_features(root / "synthetic" / "full_seed0")
    assert len(syn) == 5 * 20
    assert (root / "figures" / "features_full_seed0.png").exists()


def test_evaluate_ablation_label(tmp_path, config):
    root = tmp_path / "r"
    _prepare(root, config, "--ablation", "wCPC")
    assert run("evaluate", "--config", str(config), "--out", str(root), "--ablation", "wCPC") == 0
    report = json.loads((root / "reports" / "report_wCPC_seed0.json").read_text())
    assert report["label"] == "MM_wCPC"
    assert "MM_wCPC" in (root / "reports" / "report_wCPC_seed0.txt").read_text()


def test_evaluate_without_checkpoint_for_that_ablation_exits_3(tmp_path, config, capsys):
    root = tmp_path / "r"
    _prepare(root, config)
    assert run("evaluate", "--config", str(config), "--out", str(root), "--ablation", "wE") == 3
    assert "train" in capsys.readouterr().err


def test_setting_a_with_empty_seen_test_split_exits_2(tmp_path, config, capsys):
    root = tmp_path / "r"
    env = {"MMGZSL_SPLIT__TRAIN_FRACTION": "0.99"}
    assert run("gen-data", "--config", str(config), "--out", str(root), env=env) == 0
    assert run("train", "--config", str(config), "--out", str(root), env=env) == 0
    assert run("evaluate", "--config", str(config), "--out", str(root), "--setting", "A",
               env=env) == 2
    assert "S_test" in capsys.readouterr().err


def test_corrupt_checkpoint_exits_3(tmp_path, config):
    root = tmp_path / "r"
    _prepare(root, config)
    cvae = next((root / "checkpoints").glob("cvae-*.ckpt"))
    cvae.write_bytes(b"garbage")
    assert run("evaluate", "--config", str(config), "--out", str(root)) == 3


def test_synthesize_writes_features(tmp_path, config):
    root = tmp_path / "r"
    _prepare(root, config)
    assert run("synthesize", "--config", str(config), "--out", str(root)) == 0
    fs = load_features(root / "synthetic" / "full_seed0")
    assert sorted(np.unique(fs.classes).tolist()) == [1, 2, 3, 4, 5]


def test_divergence_exits_4(tmp_path, config):
    root = tmp_path / "r"
    assert run("gen-data", "--config", str(config), "--out", str(root)) == 0
    with np.errstate(all="ignore"):
        code = run("train", "--config", str(config), "--out", str(root),
                   env={"MMGZSL_CYCLE__LEARNING_RATE": "1e300"})
    assert code == 4


def test_ablate_table_has_one_row_per_tag(tmp_path, config):
    root = tmp_path / "r"
    assert run("gen-data", "--config", str(config), "--out", str(root)) == 0
    assert run("ablate", "--config", str(config), "--out", str(root)) == 0
    table = (root / "reports" / "ablation.txt").read_text().splitlines()
    assert [r.split()[0] for r in table[1:]] == [ev.LABELS[t] for t in ev.ABLATIONS]
    doc = json.loads((root / "reports" / "ablation.json").read_text())
    assert len(doc) == 8 and all(len(d["reports"]) == 2 for d in doc)
    assert all(d["mcnemar"] is not None for d in doc[1:])
    assert (root / "figures" / "ablation_H.png").exists()


def test_ablate_resume_reuses_checkpoints(tmp_path, config, monkeypatch):
    root = tmp_path / "r"
    env = {"MMGZSL_EVAL__ABLATIONS": "[full, wC]"}
    assert run("gen-data", "--config", str(config), "--out", str(root)) == 0
    assert run("ablate", "--config", str(config), "--out", str(root), env=env) == 0
    first = _tree(root / "reports")

    def refuse(*args, **kwargs):
        raise AssertionError("retrained although a checkpoint exists")

    monkeypatch.setattr(ev, "train_cycle", refuse)
    monkeypatch.setattr(ev, "train_synth", refuse)
    assert run("ablate", "--config", str(config), "--out", str(root), "--resume", env=env) == 0
    assert _tree(root / "reports") == first


def test_resume_after_interruption_trains_only_what_is_missing(tmp_path, config, monkeypatch):
    root = tmp_path / "r"
    _prepare(root, config)
    calls = []
    original = ev.train_synth

    def counting(*args, **kwargs):
        calls.append(1)
        return original(*args, **kwargs)

    monkeypatch.setattr(ev, "train_synth", counting)
    env = {"MMGZSL_EVAL__ABLATIONS": "[full]", "MMGZSL_EVAL__SEEDS": "2"}
    assert run("ablate", "--config", str(config), "--out", str(root), "--resume", env=env) == 0
    # seed 0 was trained by the train command; only seed 1 is new
    assert len(calls) == 1


def test_every_output_is_byte_identical_across_runs(tmp_path, config):
    for name in ("a", "b"):
        root = tmp_path / name
        _prepare(root, config)
        assert run("synthesize", "--config", str(config), "--out", str(root)) == 0
        assert run("evaluate", "--config", str(config), "--out", str(root)) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a.keys() == b.keys()
    assert [k for k in a if a[k] != b[k]] == []
