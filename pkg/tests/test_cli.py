import json

import pytest
from click.testing import CliRunner

from abag_bench.cli import main
from abag_bench.dataset import load_dataset, write_dataset
from abag_bench.synth import SyntheticConfig, generate

SMOKE = {
    "synth": {
        "n_families": 5, "antibodies_per_family": 4, "n_antigens": 8,
        "hc_len": 40, "lc_len": 44, "ag_len": 60, "antigen_motif_copies": 2,
        "positivity_tolerance": 0.2,
    },
    "model": {"d_model": 16, "n_layers": 1, "n_heads": 2, "d_ff": 32,
              "max_input_len": 160},
    "training": {"max_lr": 0.001, "total_steps": 6, "batch_size": 8},
    "pretrain_steps": 4,
}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    dataset, _ = generate(SyntheticConfig(seed=40, **SMOKE["synth"]))
    write_dataset(dataset, root)
    return root


@pytest.fixture()
def runner():
    return CliRunner()


def test_synth_command(runner, tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps(SMOKE))
    result = runner.invoke(main, ["synth", "--seed", "40", "--config", str(config),
                                  "--out", str(tmp_path / "ds")])
    assert result.exit_code == 0, result.output
    dataset = load_dataset(tmp_path / "ds")
    assert len(dataset.antibodies) == 20
    assert (tmp_path / "ds" / "truth.json").exists()


def test_load_command(runner, data_dir, tmp_path):
    result = runner.invoke(main, ["load", str(data_dir), "--task", "binding",
                                  "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "positivity" in result.output
    assert (tmp_path / "summary_binding.csv").exists()
    assert (tmp_path / "summary_binding.json").exists()


def test_cluster_command(runner, data_dir, tmp_path):
    result = runner.invoke(main, ["cluster", str(data_dir), "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "clusters.tsv").read_text().splitlines()
    assert len(lines) == 20


def test_split_command(runner, data_dir, tmp_path):
    result = runner.invoke(main, [
        "split", str(data_dir), "--task", "binding", "--strategy", "mab_exclusive",
        "--k", "4", "--seed", "3", "--out", str(tmp_path),
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "validation_binding_mab_exclusive.json").read_text())
    assert report["passed"] is True
    folds = (tmp_path / "folds_binding_mab_exclusive.csv").read_text().splitlines()
    assert folds[0] == "pair_id,fold"


def test_split_env_seed_override(runner, data_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("ABAG_BENCH_SEED", "99")
    r1 = runner.invoke(main, ["split", str(data_dir), "--task", "binding",
                              "--strategy", "lenient", "--seed", "3",
                              "--out", str(tmp_path / "a")])
    monkeypatch.delenv("ABAG_BENCH_SEED")
    r2 = runner.invoke(main, ["split", str(data_dir), "--task", "binding",
                              "--strategy", "lenient", "--seed", "99",
                              "--out", str(tmp_path / "b")])
    assert r1.exit_code == 0 and r2.exit_code == 0
    a = (tmp_path / "a" / "folds_binding_lenient.csv").read_bytes()
    b = (tmp_path / "b" / "folds_binding_lenient.csv").read_bytes()
    assert a == b


def test_split_infeasible_exits_2(runner, data_dir, tmp_path):
    result = runner.invoke(main, [
        "split", str(data_dir), "--task", "binding", "--strategy", "mab_cluster_exclusive",
        "--k", "10", "--out", str(tmp_path),
    ])
    assert result.exit_code == 2


def test_train_command(runner, data_dir, tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps(SMOKE))
    result = runner.invoke(main, [
        "train", str(data_dir), "--task", "binding", "--strategy", "lenient",
        "--fold", "0", "--k", "2", "--seed", "1", "--config", str(config),
        "--out", str(tmp_path / "run"),
    ])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "run" / "model_binding_lenient_f0_random.npz").exists()
    log = (tmp_path / "run" / "log_binding_lenient_f0_random.csv").read_text().splitlines()
    assert log[0] == "step,lr,loss"
    assert len(log) == 1 + SMOKE["training"]["total_steps"]


def test_run_matrix_and_report_commands(runner, data_dir, tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps(SMOKE))
    out = tmp_path / "matrix"
    result = runner.invoke(main, [
        "run-matrix", "--data", str(data_dir), "--k", "2", "--seed", "5",
        "--task", "binding", "--strategy", "lenient", "--strategy", "mab_exclusive",
        "--init", "random", "--init", "pretrained",
        "--jobs", "1", "--config", str(config), "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert len(report["cells"]) == 4
    assert (out / "radar.svg").exists()

    rerun = runner.invoke(main, ["report", str(out / "report.json"),
                                 "--format", "csv", "--out", str(tmp_path / "csv")])
    assert rerun.exit_code == 0, rerun.output
    assert (tmp_path / "csv" / "matrix.csv").exists()

    breadth = runner.invoke(main, ["breadth", str(out / "report.json"),
                                   "--out", str(tmp_path / "breadth")])
    assert breadth.exit_code == 0, breadth.output
    assert (tmp_path / "breadth" / "breadth.csv").exists()


def test_missing_dataset_exits_nonzero(runner, tmp_path):
    result = runner.invoke(main, ["load", str(tmp_path), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
