"""Command-line interface

    python -m src.cli synth --output data/synthetic
    python -m src.cli train --config configs/synthetic.env --data-dir data/synthetic
    python -m src.cli evaluate --config configs/action3d.env --protocol as_subsets
    python -m src.cli sweep --config configs/action3d.env --parameter K --values 25,50,100,200
    python -m src.cli report workspace/bundles/train_synthetic

Every PipelineConfig key is also a flag (--n-clusters, --pool-seed, ...) and
overrides the config file and TRAJ_<KEY> environment variables.
Exit codes: 0 success, 1 invalid input, 2 pipeline stage failure.
"""

import asyncio
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import click

from src.config.pipeline_config import SWEEP_PARAMETERS, PipelineConfig
from src.utils.config_loader import load_config
from src.utils.error_handler import ConfigurationError, PipelineStageError, TrajectoryletError
from src.utils.logger import setup_logger

EXIT_INPUT_ERROR = 1
EXIT_STAGE_ERROR = 2


def _flag(field_name: str) -> str:
    return "--" + field_name.replace("_", "-")


def pipeline_options(func: Callable) -> Callable:
    """Add --config plus one string flag per PipelineConfig field."""
    for name, info in reversed(list(PipelineConfig.model_fields.items())):
        func = click.option(_flag(name), name, default=None, type=str,
                            help=info.description or f"override {name}")(func)
    return click.option("--config", "config_file", default=None, type=click.Path(dir_okay=False),
                        help="key=value config file (seeds mandatory)")(func)


def build_config(config_file: Optional[str], values: Dict[str, Any]) -> PipelineConfig:
    overrides = {name: values.pop(name) for name in list(values) if name in PipelineConfig.model_fields}
    config = load_config(config_file, overrides={k: v for k, v in overrides.items() if v is not None})
    setup_logger(name="", level=config.log_level)
    return config


def handle_errors(func: Callable) -> Callable:
    """Map pipeline failures to exit codes with the stage tag on stderr."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PipelineStageError as e:
            click.echo(f"[{e.stage}] {type(e.cause).__name__}: {e.cause}", err=True)
            sys.exit(EXIT_STAGE_ERROR)
        except TrajectoryletError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_INPUT_ERROR)
    return wrapper


def _load_sequences(config: PipelineConfig):
    from src.features.skeleton_io import load_dataset

    if not config.data_dir:
        raise ConfigurationError("--data-dir (or data_dir in the config file) is required")
    return load_dataset(config.data_dir, format=config.data_format, exclusion_list=config.exclusion_list,
                        coordinates=config.coordinates, topology_name=config.resolved_topology())


def _write_report(name: str, text: str, config: PipelineConfig, suffix: str = ".txt") -> Path:
    from src.utils.workspace import get_workspace

    path = get_workspace(config.output_dir).get_report_path(name, suffix)
    path.write_text(text, encoding="utf-8")
    return path


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
def cli(log_level: Optional[str]):
    """Trajectorylet skeleton action recognition."""
    setup_logger(name="", level=log_level)


@cli.command()
@click.option("--source", required=True, type=click.Path(exists=True, file_okay=False), help="MSR skeleton directory")
@click.option("--target", required=True, type=click.Path(file_okay=False), help="Canonical output directory")
@click.option("--coordinates", default="real_world", type=click.Choice(["real_world", "screen"]))
@click.option("--topology", default="msr_action3d", help="Joint topology preset")
@handle_errors
def ingest(source: str, target: str, coordinates: str, topology: str):
    """Convert MSR Action3D / DailyActivity3D skeleton files to canonical files."""
    from src.adapters.msr_adapter import convert_directory

    converted, failures = convert_directory(source, target, coordinates=coordinates, topology_name=topology)
    click.echo(f"converted {converted} file(s) into {target}")
    for failure in failures:
        click.echo(f"skipped: {failure}", err=True)
    if converted == 0:
        sys.exit(EXIT_INPUT_ERROR)


@cli.command()
@pipeline_options
@click.option("--run-name", default=None, help="Run name (bundle and report file names)")
@click.option("--bundle-dir", default=None, help="Bundle directory (default: <output_dir>/bundles/<run-name>)")
@click.option("--timings/--no-timings", default=True, help="Print stage timings")
@handle_errors
def train(config_file, run_name, bundle_dir, timings, **values):
    """Run the full pipeline on one train/test split and save the bundle."""
    from src.workflow import run_pipeline

    config = build_config(config_file, values)
    if config.protocol == "as_subsets":
        raise ConfigurationError("train runs a single split; use `evaluate --protocol as_subsets` for action subsets")
    result = asyncio.run(run_pipeline(config, run_name=run_name, bundle_dir=bundle_dir))
    click.echo(result["report"].to_text(include_timings=timings))
    if result.get("bundle_dir"):
        click.echo(f"bundle: {result['bundle_dir']}")


@cli.command()
@pipeline_options
@click.option("--bundle", "bundle_path", default=None, type=click.Path(exists=True, file_okay=False),
              help="Evaluate a saved bundle on data_dir instead of training")
@click.option("--run-name", default="evaluate")
@click.option("--no-bundles", is_flag=True, help="Do not save per-split bundles")
@handle_errors
def evaluate(config_file, bundle_path, run_name, no_bundles, **values):
    """Evaluate a protocol (train + test per split), or a saved bundle."""
    from src.harness.bundle import ModelBundle, evaluate_bundle
    from src.harness.protocols import ProtocolSpec, evaluate_protocol

    config = build_config(config_file, values)
    sequences = _load_sequences(config)

    if bundle_path:
        bundle = ModelBundle.load(bundle_path)
        if config.test_subjects:
            wanted = set(config.test_subjects)
            sequences = [s for s in sequences if s.subject_id in wanted]
        report = evaluate_bundle(bundle, sequences, name=run_name)
        click.echo(report.to_text())
        _write_report(run_name, report.to_metrics(), config, ".metrics.txt")
        return

    outcome = asyncio.run(evaluate_protocol(sequences, ProtocolSpec.from_config(config), config,
                                            run_name=run_name, save_bundles=not no_bundles))
    click.echo(outcome.to_text(include_timings=True))
    path = _write_report(run_name, outcome.to_text(), config)
    _write_report(run_name, outcome.to_metrics(), config, ".metrics.txt")
    click.echo(f"report: {path}")


@cli.command(name="sweep")
@pipeline_options
@click.option("--parameter", required=True, type=click.Choice(sorted(SWEEP_PARAMETERS)))
@click.option("--values", "values_text", required=True, help="Comma-separated; components as x0+x1")
@click.option("--second-parameter", default=None, type=click.Choice(sorted(SWEEP_PARAMETERS)))
@click.option("--second-values", default=None, help="Values of the second parameter (two-way table)")
@handle_errors
def sweep_command(config_file, parameter, values_text, second_parameter, second_values, **values):
    """Accuracy table over one parameter (or a pair of parameters)."""
    from src.harness.sweep import parse_sweep_values, sweep

    config = build_config(config_file, values)
    sequences = _load_sequences(config)
    if second_parameter and not second_values:
        raise ConfigurationError("--second-parameter needs --second-values")
    first = parse_sweep_values(parameter, values_text)
    second = parse_sweep_values(second_parameter, second_values) if second_parameter else None

    result = asyncio.run(sweep(config, parameter, first, sequences, second_parameter, second))
    text = result.to_text()
    click.echo(text)
    name = f"sweep_{parameter}" + (f"_{second_parameter}" if second_parameter else "")
    click.echo(f"report: {_write_report(name, text, config)}")


@cli.command()
@click.option("--output", "-o", required=True, type=click.Path(file_okay=False), help="Output directory")
@click.option("--classes", default=4, show_default=True, type=int)
@click.option("--instances-per-class", default=40, show_default=True, type=int)
@click.option("--joints", default=8, show_default=True, type=int)
@click.option("--min-frames", default=30, show_default=True, type=int)
@click.option("--max-frames", default=50, show_default=True, type=int)
@click.option("--noise", default=0.01, show_default=True, type=float, help="Coordinate noise std (m)")
@click.option("--motif-length", default=5, show_default=True, type=int)
@click.option("--subjects", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@handle_errors
def synth(output, classes, instances_per_class, joints, min_frames, max_frames, noise, motif_length, subjects, seed):
    """Generate a planted-motif synthetic dataset in canonical format."""
    from src.harness.synthetic import SyntheticSpec, generate_synthetic

    spec = SyntheticSpec(class_count=classes, instances_per_class=instances_per_class, joint_count=joints,
                         min_frames=min_frames, max_frames=max_frames, noise=noise,
                         motif_length=motif_length, subject_count=subjects, seed=seed)
    dataset = generate_synthetic(spec, output)
    click.echo(f"wrote {len(dataset.sequences)} instances to {output}")


@cli.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--metrics", is_flag=True, help="Print the `metric value` lines instead")
@handle_errors
def report(bundle_dir: str, metrics: bool):
    """Print the evaluation report stored in a bundle."""
    name = "metrics.txt" if metrics else "report.txt"
    path = Path(bundle_dir) / name
    if not path.is_file():
        raise click.FileError(str(path), hint="bundle has no stored report")
    click.echo(path.read_text(encoding="utf-8"), nl=False)


if __name__ == "__main__":
    cli()
