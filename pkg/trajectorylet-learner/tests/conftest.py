"""Shared fixtures: isolated workspace, fresh run globals, small datasets"""

import logging
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

os.environ.setdefault("LANGSMITH_TRACING", "false")
os.environ.setdefault("LANGCHAIN_TRACING_V2", "false")

from src.config.pipeline_config import create_config  # noqa: E402
from src.features.skeleton_io import SkeletonSequence  # noqa: E402
from src.harness.synthetic import SyntheticSpec, generate_synthetic  # noqa: E402
from src.utils.concurrency import reset_semaphores  # noqa: E402
from src.utils.error_handler import reset_error_accumulator  # noqa: E402
from src.utils.session_logger import reset_run_logger  # noqa: E402
from src.utils.workspace import reset_workspace  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_globals():
    reset_error_accumulator()
    reset_semaphores()
    reset_workspace()
    reset_run_logger()
    yield
    reset_workspace()
    reset_run_logger()
    # console handlers bound to a CliRunner stream outlive it
    root = logging.getLogger()
    for handler in list(root.handlers):
        if type(handler) is logging.StreamHandler:
            root.removeHandler(handler)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_sequence(positions, class_label=1, subject_id=1, trial_id=1, instance_id="a01_s01_e01",
                  hip_index=0, topology=None):
    positions = np.asarray(positions, dtype=float)
    if topology is None:
        topology = tuple((0, j) for j in range(1, positions.shape[1]))
    return SkeletonSequence(positions, class_label, subject_id, trial_id, hip_index, topology, instance_id)


@pytest.fixture
def small_synthetic():
    """3 classes x 8 instances over 4 subjects: subjects 1, 3 train and 2, 4 test."""
    spec = SyntheticSpec(class_count=3, instances_per_class=8, min_frames=20, max_frames=24,
                         subject_count=4, seed=7)
    return generate_synthetic(spec)


@pytest.fixture
def small_config(tmp_path):
    return create_config(
        "synthetic",
        pool_size=400,
        n_top=10,
        per_instance_budget=3,
        n_clusters=12,
        cv_folds=2,
        cv_grid=[0.1, 1.0, 10.0],
        esvm_max_iterations=3000,
        svm_max_iterations=20000,
        workers=2,
        output_dir=str(tmp_path / "workspace"),
    )


@pytest.fixture
def sequence_factory():
    return make_sequence
