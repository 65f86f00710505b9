import json

import numpy as np
import pytest

from sigdistill.cli import main, parse_manifest
from sigdistill.dataio import load_sigds, take_per_class
from sigdistill.errors import ParseError

BASE_CONFIG = {
    "out_dir": "run",
    "method": "mdm",
    "generation": {
        "schemes": ["BPSK", "QPSK", "PAM4"],
        "n_per_class": 25,
        "n_samples": 32,
        "samples_per_symbol": 8,
        "snr_db_min": 10,
        "snr_db_max": 18,
        "snr_db_step": 2,
        "seed": 3,
        "test_fraction": 0.2,
    },
    "distill": {
        "iterations": 4,
        "lr": 0.001,
        "alpha": 1.0,
        "spc": 2,
        "real_batch_per_class": 8,
        "arch": "cnn2",
        "seed": 3,
    },
    "eval": {"arch": "cnn2", "epochs": 3, "n_runs": 2, "seed": 3},
    "crossarch": {"distill_archs": ["cnn2"], "eval_archs": ["cnn2"]},
}


def write_config(tmp_path, **updates):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["out_dir"] = str(tmp_path / "run")
    for block, fields in updates.items():
        if isinstance(fields, dict):
            cfg.setdefault(block, {}).update(fields)
        else:
            cfg[block] = fields
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg, indent=1))
    return path, tmp_path / "run"


def test_gen_writes_split_files(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    train = load_sigds(out / "train.sigds")
    test = load_sigds(out / "test.sigds")
    assert train.class_counts() == [20, 20, 20]
    assert test.class_counts() == [5, 5, 5]
    assert (out / "manifest.json").exists()


def test_gen_deterministic_bytes(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    first = (out / "train.sigds").read_bytes()
    assert main(["gen", "--config", str(cfg), "--force"]) == 0
    assert (out / "train.sigds").read_bytes() == first


def test_malformed_config_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n "method": mdm\n}\n')
    assert main(["gen", "--config", str(path)]) == 1
    err = capsys.readouterr().err
    assert "line 2" in err


def test_unknown_config_key_rejected(tmp_path):
    cfg, _ = write_config(tmp_path, distill={"learning_rate_typo": 1})
    with pytest.raises(ParseError, match="distill"):
        parse_manifest(cfg)


def test_random_method_matches_take_per_class(tmp_path):
    cfg, out = write_config(tmp_path, method="random")
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["distill", "--config", str(cfg)]) == 0
    synth = load_sigds(out / "synth_random_2.sigds")
    train = load_sigds(out / "train.sigds")
    expected = take_per_class(train, 2, seed=3)
    got, _ = synth.as_arrays()
    want, _ = expected.base.as_arrays()
    assert got.tobytes() == want.tobytes()
    assert (out / "loss.csv").read_bytes() == b""


def test_dm_equals_mdm_alpha_zero(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["distill", "--config", str(cfg), "--method", "dm"]) == 0
    dm_bytes = (out / "synth_dm_2.sigds").read_bytes()
    assert main(["distill", "--config", str(cfg), "--method", "mdm", "--alpha", "0", "--force"]) == 0
    mdm_bytes = (out / "synth_mdm_2.sigds").read_bytes()
    # identical payload apart from the method-specific file name
    assert dm_bytes == mdm_bytes


def test_distill_writes_loss_csv(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["distill", "--config", str(cfg)]) == 0
    lines = (out / "loss.csv").read_text().strip().splitlines()
    assert lines[0] == "iter,l_td,l_fd,l_total"
    assert len(lines) >= 2
    iteration, l_td, l_fd, l_total = lines[1].split(",")
    assert iteration == "0"
    assert float(l_total) == pytest.approx(float(l_td) + float(l_fd), rel=1e-6)


def test_distill_requires_train_file(tmp_path, capsys):
    cfg, out = write_config(tmp_path)
    assert main(["distill", "--config", str(cfg)]) == 1
    assert "train.sigds" in capsys.readouterr().err


def test_force_guard(tmp_path, capsys):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["gen", "--config", str(cfg)]) == 1
    assert "--force" in capsys.readouterr().err
    assert main(["gen", "--config", str(cfg), "--force"]) == 0


def test_eval_missing_synth_names_path(tmp_path, capsys):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["eval", "--config", str(cfg)]) == 1
    assert "synth_mdm_2.sigds" in capsys.readouterr().err


def test_eval_three_method_table(tmp_path, capsys):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    for method in ("random", "dm", "mdm"):
        assert main(["distill", "--config", str(cfg), "--method", method, "--force"]) == 0
    assert main(["eval", "--config", str(cfg)]) == 0
    lines = (out / "eval_cnn2_2.csv").read_text().strip().splitlines()
    assert lines[0].startswith("method,arch,spc,n_runs,mean_accuracy,std_accuracy")
    methods = [line.split(",")[0] for line in lines[1:]]
    assert methods == ["random", "dm", "mdm"]
    table = capsys.readouterr().out
    assert "mean_acc(%)" in table


def test_eval_csv_deterministic(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["distill", "--config", str(cfg)]) == 0
    assert main(["eval", "--config", str(cfg)]) == 0
    first = (out / "eval_cnn2_2.csv").read_bytes()
    assert main(["eval", "--config", str(cfg), "--force"]) == 0
    assert (out / "eval_cnn2_2.csv").read_bytes() == first


def test_crossarch_writes_matrix_csv(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["crossarch", "--config", str(cfg)]) == 0
    lines = (out / "crossarch_cnn2.csv").read_text().strip().splitlines()
    assert lines[0].startswith("distill_arch,eval_arch,mean_accuracy")
    assert lines[1].startswith("cnn2,cnn2,")


def test_seed_override_applies_everywhere(tmp_path):
    cfg, out = write_config(tmp_path)
    man = parse_manifest(cfg, {"seed": 99})
    assert man.gen.seed == 99 and man.distill.seed == 99 and man.eval.seed == 99


def test_manifest_copy_is_stable(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    first = (out / "manifest.json").read_bytes()
    assert main(["gen", "--config", str(cfg), "--force"]) == 0
    assert (out / "manifest.json").read_bytes() == first
    resolved = json.loads(first)
    assert resolved["method"] == "mdm"
    assert resolved["distill"]["spc"] == 2


def test_plot_emits_svg(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    svg = tmp_path / "fig.svg"
    assert main(["plot", str(out / "train.sigds"), "BPSK", str(svg), "--records", "2"]) == 0
    text = svg.read_text()
    assert text.startswith("<svg")
    assert text.count("<polyline") == 2 * 4


def test_plot_compare_layout(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["distill", "--config", str(cfg), "--method", "random"]) == 0
    svg = tmp_path / "cmp.svg"
    rc = main(
        [
            "plot",
            str(out / "train.sigds"),
            "QPSK",
            str(svg),
            "--compare",
            str(out / "synth_random_2.sigds"),
            "--records",
            "1",
        ]
    )
    assert rc == 0
    text = svg.read_text()
    assert "real (top) vs synthetic (bottom)" in text
    assert text.count("<polyline") == 2 * 4


def test_plot_unknown_class_lists_available(tmp_path, capsys):
    cfg, out = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == 0
    assert main(["plot", str(out / "train.sigds"), "GMSK", str(tmp_path / "x.svg")]) == 1
    err = capsys.readouterr().err
    assert "BPSK" in err and "QPSK" in err


def test_plot_all_zero_record_flat_lines(tmp_path):
    from sigdistill.dataio import LabeledSignalSet, SignalRecord, save_sigds

    zero = LabeledSignalSet(
        (SignalRecord(np.zeros(16), np.zeros(16), 0),), ("flat",), 16
    )
    path = tmp_path / "zero.sigds"
    save_sigds(zero, path)
    svg = tmp_path / "zero.svg"
    assert main(["plot", str(path), "flat", str(svg), "--records", "1"]) == 0
    text = svg.read_text()
    for chunk in text.split("<polyline")[1:]:
        points = chunk.split('points="')[1].split('"')[0].split()
        ys = {p.split(",")[1] for p in points}
        assert len(ys) == 1  # flat line
