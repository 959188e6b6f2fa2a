import pytest
from click.testing import CliRunner

from src.cli import EXIT_INPUT_ERROR, EXIT_STAGE_ERROR, cli
from src.features.skeleton_io import CANONICAL_SUFFIX

SMALL_FLAGS = [
    "--dataset", "synthetic",
    "--pool-size", "400",
    "--n-top", "10",
    "--per-instance-budget", "3",
    "--n-clusters", "12",
    "--cv-folds", "2",
    "--cv-grid", "0.1,1,10",
    "--esvm-max-iterations", "3000",
    "--svm-max-iterations", "20000",
    "--workers", "2",
]


@pytest.fixture
def runner(monkeypatch):
    for name in ("TRAJ_DATA_DIR", "TRAJ_DATASET", "TRAJ_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    return CliRunner()


@pytest.fixture
def synth_dir(runner, tmp_path):
    target = tmp_path / "data"
    result = runner.invoke(cli, ["synth", "--output", str(target), "--classes", "3", "--instances-per-class", "8",
                                 "--min-frames", "20", "--max-frames", "24", "--subjects", "4", "--seed", "7"])
    assert result.exit_code == 0, result.output
    assert "wrote 24 instances" in result.output
    return target


def test_synth_writes_canonical_files(synth_dir):
    assert len(list(synth_dir.glob(f"*{CANONICAL_SUFFIX}"))) == 24
    assert (synth_dir / "motifs.txt").is_file()


def test_train_report_and_evaluate(runner, synth_dir, tmp_path):
    workspace = tmp_path / "workspace"
    result = runner.invoke(cli, ["train", "--data-dir", str(synth_dir), "--output-dir", str(workspace),
                                 "--run-name", "cli_run", "--no-timings", *SMALL_FLAGS])
    assert result.exit_code == 0, result.output
    assert "EVALUATION REPORT: cli_run (synthetic)" in result.output
    assert "Stage timings" not in result.output

    bundle = workspace / "bundles" / "cli_run"
    assert bundle.is_dir()

    shown = runner.invoke(cli, ["report", str(bundle)])
    assert shown.exit_code == 0
    assert shown.output == (bundle / "report.txt").read_text()

    metrics = runner.invoke(cli, ["report", str(bundle), "--metrics"])
    assert metrics.exit_code == 0
    assert metrics.output.startswith("accuracy ")

    evaluated = runner.invoke(cli, ["evaluate", "--bundle", str(bundle), "--data-dir", str(synth_dir),
                                    "--dataset", "synthetic", "--test-subjects", "2,4",
                                    "--output-dir", str(workspace)])
    assert evaluated.exit_code == 0, evaluated.output
    stored = dict(line.split(" ", 1) for line in (bundle / "metrics.txt").read_text().splitlines())
    assert f"({int(float(stored['accuracy']) * 12 + 0.5)}/12)" in evaluated.output
    assert (workspace / "reports" / "evaluate.metrics.txt").is_file()


def test_train_without_data_is_a_stage_failure(runner, tmp_path):
    result = runner.invoke(cli, ["train", "--output-dir", str(tmp_path / "workspace"), *SMALL_FLAGS])
    assert result.exit_code == EXIT_STAGE_ERROR
    assert "[data_loading]" in result.output


def test_evaluate_without_data_dir_is_an_input_error(runner, tmp_path):
    result = runner.invoke(cli, ["evaluate", "--output-dir", str(tmp_path / "workspace"), *SMALL_FLAGS])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "data-dir" in result.output


def test_invalid_flag_value_is_an_input_error(runner, tmp_path):
    result = runner.invoke(cli, ["train", "--output-dir", str(tmp_path), "--n-clusters", "many"])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "invalid configuration" in result.output


def test_invalid_synthetic_spec_is_an_input_error(runner, tmp_path):
    result = runner.invoke(cli, ["synth", "--output", str(tmp_path / "bad"), "--classes", "1"])
    assert result.exit_code == EXIT_INPUT_ERROR


def test_report_on_bundle_without_report(runner, tmp_path):
    empty = tmp_path / "bundle"
    empty.mkdir()
    result = runner.invoke(cli, ["report", str(empty)])
    assert result.exit_code != 0


def test_train_rejects_action_subsets(runner, tmp_path):
    result = runner.invoke(cli, ["train", "--dataset", "action3d", "--protocol", "as_subsets",
                                 "--data-dir", str(tmp_path), "--output-dir", str(tmp_path / "workspace")])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "single split" in result.output
    assert not (tmp_path / "workspace" / "bundles").exists()
